#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "kimura/cli.hpp"

namespace kimura::cli {

namespace {

using Cfg = ExperimentConfig;
using Check = std::function<std::string(double)>;

struct Key {
    std::string name;
    std::function<std::string(Cfg&, const std::string&)> set;  // error text, empty on success
    std::function<std::string(const Cfg&)> get;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// shortest text that reads back to the same double
std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
bool read_num(const std::string& s, T& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    const auto r = std::from_chars(b, e, v);
    return r.ec == std::errc() && r.ptr == e;
}

bool read_list(const std::string& s, std::vector<double>& out) {
    out.clear();
    if (s.empty()) return true;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v;
        if (!read_num(trim(item), v)) return false;
        out.push_back(v);
    }
    return true;
}

Check positive() {
    return [](double v) { return v > 0 && std::isfinite(v) ? "" : "must be finite and > 0"; };
}
Check at_least(double lo) {
    return [lo](double v) { return v >= lo && std::isfinite(v) ? "" : "must be finite and >= " + fmt(lo); };
}
Check in_open(double lo, double hi) {
    return [lo, hi](double v) { return v > lo && v < hi ? "" : "must lie in (" + fmt(lo) + ", " + fmt(hi) + ")"; };
}
Check in_half_open(double lo, double hi) {
    return [lo, hi](double v) { return v > lo && v <= hi ? "" : "must lie in (" + fmt(lo) + ", " + fmt(hi) + "]"; };
}

Key dkey(std::string name, std::function<double&(Cfg&)> ref, Check check) {
    return {std::move(name),
            [ref, check](Cfg& c, const std::string& s) -> std::string {
                double v;
                if (!read_num(s, v)) return "expected a number, got '" + s + "'";
                if (auto e = check(v); !e.empty()) return e;
                ref(c) = v;
                return "";
            },
            [ref](const Cfg& c) { return fmt(ref(const_cast<Cfg&>(c))); }};
}

Key ikey(std::string name, std::function<int&(Cfg&)> ref, Check check) {
    return {std::move(name),
            [ref, check](Cfg& c, const std::string& s) -> std::string {
                int v;
                if (!read_num(s, v)) return "expected an integer, got '" + s + "'";
                if (auto e = check(v); !e.empty()) return e;
                ref(c) = v;
                return "";
            },
            [ref](const Cfg& c) { return std::to_string(ref(const_cast<Cfg&>(c))); }};
}

Key listkey(std::string name, std::function<std::vector<double>&(Cfg&)> ref) {
    return {std::move(name),
            [ref](Cfg& c, const std::string& s) -> std::string {
                std::vector<double> v;
                if (!read_list(s, v)) return "expected a comma-separated list of numbers, got '" + s + "'";
                ref(c) = v;
                return "";
            },
            [ref](const Cfg& c) {
                std::string out;
                for (double x : ref(const_cast<Cfg&>(c))) out += (out.empty() ? "" : ",") + fmt(x);
                return out;
            }};
}

const std::vector<std::pair<const char*, noise::Kind>> kKinds = {{"white", noise::Kind::dirac_white},
                                                                 {"riesz", noise::Kind::riesz},
                                                                 {"exponential", noise::Kind::exponential},
                                                                 {"tabulated", noise::Kind::tabulated}};

Key kindkey(std::string name, std::function<noise::CovKernel&(Cfg&)> ref) {
    return {std::move(name),
            [ref](Cfg& c, const std::string& s) -> std::string {
                for (auto& [n, k] : kKinds)
                    if (s == n) {
                        ref(c).kind = k;
                        return "";
                    }
                return "expected one of white, riesz, exponential, tabulated; got '" + s + "'";
            },
            [ref](const Cfg& c) -> std::string {
                for (auto& [n, k] : kKinds)
                    if (ref(const_cast<Cfg&>(c)).kind == k) return n;
                return "?";
            }};
}

void add_kernel_keys(std::vector<Key>& K, const std::string& p, std::function<noise::CovKernel&(Cfg&)> ref) {
    K.push_back(kindkey(p + ".kind", ref));
    K.push_back(dkey(p + ".h", [ref](Cfg& c) -> double& { return ref(c).h; }, in_open(0, 1)));
    K.push_back(dkey(p + ".ell", [ref](Cfg& c) -> double& { return ref(c).ell; }, positive()));
    K.push_back(listkey(p + ".x", [ref](Cfg& c) -> std::vector<double>& { return ref(c).tab_x; }));
    K.push_back(listkey(p + ".f", [ref](Cfg& c) -> std::vector<double>& { return ref(c).tab_f; }));
}

const std::vector<Key>& registry() {
    static const std::vector<Key> K = [] {
        std::vector<Key> K;
        K.push_back({"command",
                     [](Cfg& c, const std::string& s) -> std::string {
                         return parse_command(s, c.command) ? "" : "unknown command '" + s + "'";
                     },
                     [](const Cfg& c) { return std::string(command_name(c.command)); }});
        K.push_back({"out",
                     [](Cfg& c, const std::string& s) -> std::string {
                         if (s.empty()) return "must not be empty";
                         c.out = s;
                         return "";
                     },
                     [](const Cfg& c) { return c.out; }});
        K.push_back({"seed",
                     [](Cfg& c, const std::string& s) -> std::string {
                         std::uint64_t v;
                         if (!read_num(s, v)) return "expected an unsigned 64-bit integer, got '" + s + "'";
                         c.seed = v;
                         return "";
                     },
                     [](const Cfg& c) { return std::to_string(c.seed); }});
        K.push_back(ikey("threads", [](Cfg& c) -> int& { return c.threads; }, at_least(0)));

        K.push_back(dkey("kernel.nu", [](Cfg& c) -> double& { return c.kernel.nu; },
                         [](double v) { return std::isfinite(v) && v < 1 ? "" : "must be finite and < 1"; }));

        K.push_back(dkey("quad.rel_tol", [](Cfg& c) -> double& { return c.quad.rel_tol; }, in_half_open(0, 1e-2)));
        K.push_back(dkey("quad.target_rel_tol", [](Cfg& c) -> double& { return c.quad.target_rel_tol; },
                         in_half_open(0, 1e-2)));
        K.push_back(ikey("quad.base_points", [](Cfg& c) -> int& { return c.quad.base_points; }, at_least(2)));
        K.push_back(dkey("quad.trunc_c", [](Cfg& c) -> double& { return c.quad.trunc_c; }, positive()));

        K.push_back(dkey("noise.beta", [](Cfg& c) -> double& { return c.noise.beta; }, at_least(0)));
        add_kernel_keys(K, "noise.spatial", [](Cfg& c) -> noise::CovKernel& { return c.noise.spatial; });
        add_kernel_keys(K, "noise.temporal", [](Cfg& c) -> noise::CovKernel& { return c.noise.temporal; });

        K.push_back(dkey("grid.z_max", [](Cfg& c) -> double& { return c.grid.z_max; }, positive()));
        K.push_back(ikey("grid.nz", [](Cfg& c) -> int& { return c.grid.nz; }, at_least(1)));
        K.push_back(dkey("grid.t_max", [](Cfg& c) -> double& { return c.grid.t_max; }, positive()));
        K.push_back(ikey("grid.nt", [](Cfg& c) -> int& { return c.grid.nt; }, at_least(1)));

        K.push_back(ikey("chaos.levels", [](Cfg& c) -> int& { return c.chaos.levels; }, at_least(1)));
        K.push_back(dkey("chaos.eps", [](Cfg& c) -> double& { return c.chaos.eps; }, positive()));
        K.push_back(ikey("chaos.x_per_decade", [](Cfg& c) -> int& { return c.chaos.x_per_decade; }, at_least(2)));
        K.push_back(ikey("chaos.t_per_decade", [](Cfg& c) -> int& { return c.chaos.t_per_decade; }, at_least(1)));
        K.push_back(ikey("chaos.colored_refine", [](Cfg& c) -> int& { return c.chaos.colored_refine; }, at_least(1)));

        K.push_back(ikey("mc.paths", [](Cfg& c) -> int& { return c.mc.paths; }, at_least(100)));
        K.push_back(ikey("mc.substeps", [](Cfg& c) -> int& { return c.mc.substeps; }, at_least(1)));
        K.push_back(dkey("mc.dv", [](Cfg& c) -> double& { return c.mc.dv; }, positive()));
        K.push_back(dkey("mc.v_extend", [](Cfg& c) -> double& { return c.mc.v_extend; }, at_least(0)));
        K.push_back(dkey("mc.theta", [](Cfg& c) -> double& { return c.mc.theta; }, in_half_open(0, 1)));

        K.push_back(ikey("identities.nz", [](Cfg& c) -> int& { return c.identities.nz; }, at_least(1)));
        K.push_back(ikey("identities.nt", [](Cfg& c) -> int& { return c.identities.nt; }, at_least(1)));
        K.push_back(dkey("identities.lo", [](Cfg& c) -> double& { return c.identities.lo; }, positive()));
        K.push_back(dkey("identities.hi", [](Cfg& c) -> double& { return c.identities.hi; }, positive()));
        K.push_back(ikey("identities.semigroup", [](Cfg& c) -> int& { return c.identities.semigroup; }, at_least(0)));

        K.push_back(dkey("ratio.z", [](Cfg& c) -> double& { return c.ratio.z; }, positive()));

        K.push_back(dkey("holder.t", [](Cfg& c) -> double& { return c.holder.t; }, positive()));
        K.push_back(dkey("holder.z_top", [](Cfg& c) -> double& { return c.holder.z_top; }, positive()));
        K.push_back(ikey("holder.levels", [](Cfg& c) -> int& { return c.holder.levels; }, at_least(4)));
        K.push_back(dkey("holder.theta", [](Cfg& c) -> double& { return c.holder.theta; }, at_least(0)));
        K.push_back(ikey("holder.samples", [](Cfg& c) -> int& { return c.holder.samples; }, at_least(0)));

        K.push_back(dkey("tol.bound_slack", [](Cfg& c) -> double& { return c.tol.bound_slack; }, at_least(0)));
        K.push_back(dkey("tol.mc_gate", [](Cfg& c) -> double& { return c.tol.mc_gate; }, positive()));
        K.push_back(dkey("tol.mc_fraction", [](Cfg& c) -> double& { return c.tol.mc_fraction; }, in_half_open(0, 1)));
        return K;
    }();
    return K;
}

const Key* find_key(const std::string& name) {
    for (const auto& k : registry())
        if (k.name == name) return &k;
    return nullptr;
}

bool uses_chaos(Command c) {
    return c == Command::chaos || c == Command::bounds || c == Command::ratio || c == Command::all;
}
bool uses_mc(Command c) { return c == Command::mc || c == Command::all; }
bool uses_holder(const Cfg& c) {
    return c.command == Command::holder || (c.command == Command::all && c.noise.beta > 0.25);
}

}  // namespace

const char* command_name(Command c) {
    switch (c) {
        case Command::identities: return "identities";
        case Command::chaos: return "chaos";
        case Command::mc: return "mc";
        case Command::ratio: return "ratio";
        case Command::holder: return "holder";
        case Command::bounds: return "bounds";
        case Command::all: return "all";
    }
    return "?";
}

bool parse_command(const std::string& s, Command& out) {
    for (Command c : {Command::identities, Command::chaos, Command::mc, Command::ratio, Command::holder,
                      Command::bounds, Command::all})
        if (s == command_name(c)) {
            out = c;
            return true;
        }
    return false;
}

ConfigError::ConfigError(std::vector<std::string> v)
    : std::runtime_error(v.empty() ? "invalid configuration" : v.front()), issues(std::move(v)) {}

noise::FieldGrid ExperimentConfig::field_grid() const { return noise::FieldGrid::uniform(grid.z_max, grid.nz, grid.t_max, grid.nt); }

kernel::QuadratureSpec ExperimentConfig::quad_spec() const {
    kernel::QuadratureSpec q;
    q.rel_tol = quad.target_rel_tol;
    q.base_points = quad.base_points;
    q.trunc_c = quad.trunc_c;
    return q;
}

chaos::ChaosConfig ExperimentConfig::chaos_config() const {
    chaos::ChaosConfig c;
    c.n_levels = chaos.levels;
    c.grid = field_grid();
    c.quad = quad_spec();
    c.beta = noise.beta;
    c.eps = chaos.eps;
    c.engine.x_per_decade = chaos.x_per_decade;
    c.engine.t_per_decade = chaos.t_per_decade;
    c.engine.colored_refine = chaos.colored_refine;
    c.engine.threads = threads;
    return c;
}

mc::SimScheme ExperimentConfig::sim_scheme() const {
    mc::SimScheme s;
    s.grid = field_grid();
    s.n_paths = mc.paths;
    s.seed = seed;
    s.beta = noise.beta;
    s.substeps = mc.substeps;
    s.dv = mc.dv;
    s.v_extend = mc.v_extend;
    s.theta = mc.theta;
    s.threads = threads;
    return s;
}

void validate(const ExperimentConfig& c) {
    std::vector<std::string> issues;
    auto guard = [&](const char* section, auto&& f) {
        try {
            f();
        } catch (const std::exception& e) {
            issues.push_back(std::string(section) + ": " + e.what());
        }
    };
    guard("grid", [&] { c.field_grid(); });
    guard("kernel", [&] { c.kernel.validate(); });
    guard("quad", [&] { c.quad_spec().validate(); });
    if (c.quad.target_rel_tol > c.quad.rel_tol) issues.push_back("quad.target_rel_tol: must not exceed quad.rel_tol");
    guard("noise", [&] { c.noise.validate(); });
    if (!(c.identities.hi > c.identities.lo)) issues.push_back("identities.hi: must exceed identities.lo");
    if (issues.empty()) {
        if (uses_chaos(c.command)) guard("chaos", [&] { c.chaos_config().validate(!c.noise.white()); });
        if (uses_mc(c.command)) guard("mc", [&] { c.sim_scheme().validate(); });
        if (uses_holder(c))
            guard("holder", [&] {
                mc::SimScheme s = c.sim_scheme();
                s.pairs = {{c.holder.z_top / 2, c.holder.z_top}};
                s.pair_t = c.holder.t;
                s.validate();
            });
        if (c.command == Command::ratio) {
            if (!(c.noise.beta > 0)) issues.push_back("noise.beta: the ratio command needs beta > 0");
            const auto g = c.field_grid();
            bool on = false;
            for (double z : g.z_nodes) on = on || std::abs(z - c.ratio.z) <= 1e-9 * g.dz;
            if (!on) issues.push_back("ratio.z: " + fmt(c.ratio.z) + " is not a grid z node");
        }
    }
    if (!issues.empty()) throw ConfigError(issues);
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::vector<std::string> issues;
    std::map<std::string, int> seen;
    std::istringstream is(text);
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back("line " + std::to_string(no) + ": expected key=value, got '" + line + "'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (auto it = seen.find(key); it != seen.end()) {
            issues.push_back(key + ": duplicate key at lines " + std::to_string(it->second) + " and " + std::to_string(no));
            continue;
        }
        seen[key] = no;
        const Key* k = find_key(key);
        if (!k) {
            issues.push_back(key + ": unknown key (line " + std::to_string(no) + ")");
            continue;
        }
        if (auto e = k->set(cfg, value); !e.empty()) issues.push_back(key + ": " + e + " (line " + std::to_string(no) + ")");
    }
    if (!issues.empty()) throw ConfigError(issues);
    validate(cfg);
    return cfg;
}

std::string echo_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const auto& k : registry()) out += k.name + "=" + k.get(cfg) + "\n";
    return out;
}

}  // namespace kimura::cli
