#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "kimura/cli.hpp"

namespace kimura::cli {

namespace {

using chaos::detail::write_num;

std::string num(double v) {
    std::ostringstream os;
    write_num(os, v);
    return os.str();
}

std::string params(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "beta=" << c.noise.beta << " spatial=" << noise::kind_name(c.noise.spatial.kind)
       << " temporal=" << noise::kind_name(c.noise.temporal.kind) << " grid=" << c.grid.z_max << '/' << c.grid.nz << 'x'
       << c.grid.t_max << '/' << c.grid.nt << " levels=" << c.chaos.levels << " paths=" << c.mc.paths
       << " seed=" << c.seed;
    return os.str();
}

struct Report {
    std::string name;
    std::ostringstream text;
};

struct Context {
    const ExperimentConfig& cfg;
    std::vector<chaos::LedgerRow> ledger;
    std::ostringstream moments, recon;
    bool moments_header = true, table_written = false;
    std::vector<std::unique_ptr<Report>> reports;
    std::vector<std::pair<std::string, double>> wall;
    std::vector<std::string> notes;
    std::optional<chaos::ChaosTable> table;

    std::ostream& report(const std::string& name) {
        reports.push_back(std::make_unique<Report>());
        reports.back()->name = name;
        return reports.back()->text;
    }
    void add(int n, double z, double t, double value, const std::string& name, double bound) {
        ledger.push_back({n, z, t, value, name, bound});
    }
};

template <class F>
void stage(Context& c, const char* module, const char* label, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        f();
    } catch (const RunError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunError(std::string(module) + ": " + e.what() + " [" + params(c.cfg) + "]");
    }
    c.wall.push_back({std::string(module) + "." + label, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
}

const chaos::ChaosTable& table(Context& c) {
    if (!c.table) {
        const auto cc = c.cfg.chaos_config();
        c.table = c.cfg.noise.white() ? chaos::chaos_white(cc) : chaos::chaos_colored(cc, c.cfg.noise);
    }
    return *c.table;
}

void write_table(Context& c) {
    if (c.table_written) return;
    chaos::write_csv(c.moments, table(c), c.moments_header);
    c.moments_header = false;
    c.table_written = true;
}

// ----- stages -----

void identities(Context& c) {
    const auto& I = c.cfg.identities;
    const auto q = c.cfg.quad_spec();
    const double tol = c.cfg.quad.rel_tol;
    std::ostream& os = c.report("identities.csv");
    os << "identity,z,w,s,t,closed_form,quadrature,rel_residual\n";
    auto row = [&](const char* name, double z, double w, double s, double t, double exact, double quad) {
        const double r = std::abs(quad - exact) / std::abs(exact);
        os << name << ',' << num(z) << ',' << num(w) << ',' << num(s) << ',' << num(t) << ',' << num(exact) << ','
           << num(quad) << ',' << num(r) << '\n';
        c.add(0, z, s + t, r, std::string("identity_") + name, tol);
    };
    auto logspace = [&](int k, int n) { return n == 1 ? I.lo : I.lo * std::pow(I.hi / I.lo, double(k) / (n - 1)); };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int i = 0; i < I.nz; ++i)
        for (int j = 0; j < I.nt; ++j) {
            const double z = logspace(i, I.nz), t = logspace(j, I.nt);
            row("mass", z, nan, 0, t, kernel::mass_q0(z, t), kernel::mass_q0_quadrature(z, t, q).value);
            const double U = kernel::energy_U(z / t);
            row("energy", z, nan, 0, t, U, kernel::energy_integral_quadrature(z, t, q));
            c.add(0, z, t, U, "U_le_half", 0.5);
        }
    auto gen = noise::path_stream(c.cfg.seed, 0x5e41);
    std::uniform_real_distribution<double> u(-1.5, 0.5);
    for (int k = 0; k < I.semigroup; ++k) {
        const double z = std::pow(10, u(gen)), w = std::pow(10, u(gen)), s = std::pow(10, u(gen)), t = std::pow(10, u(gen));
        row("semigroup", z, w, s, t, kernel::q_nu(c.cfg.kernel, z, w, s + t),
            kernel::semigroup_compose(c.cfg.kernel, z, w, s, t, q));
    }
}

void chaos_rows(Context& c, bool ratio_only) {
    const auto L = chaos::build_ledger(table(c));
    for (const auto& r : L.rows)
        if (!ratio_only || r.bound_name.rfind("ratio", 0) == 0) c.ledger.push_back(r);
}

void lp_rows(Context& c) {
    const auto& T = table(c);
    if (T.beta < 0.25) {
        c.notes.push_back("bounds: L^4 level rows need beta >= 1/4, skipped");
        return;
    }
    const double p = 4;
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j) {
            const double z = T.grid.z_nodes[i], t = T.grid.t_nodes[j];
            std::optional<chaos::ColoredConstants> cc;
            if (T.colored) cc = chaos::colored_constants(T.model, t, T.eps);
            for (int n = 1; n <= T.n_levels(); ++n) {
                const double v = std::pow(p - 1, 0.5 * n) * std::sqrt(T.M(n, i, j));
                const double b = cc ? chaos::lp_level_bound_colored(n, z, t, p, *cc) : chaos::lp_level_bound_white(n, z, t, p);
                c.add(n, z, t, v, "lp4_level", b);
            }
        }
}

void ratio_rows(Context& c) {
    const auto& T = table(c);
    if (!(T.beta > 0)) throw DomainError("ratio: needs noise.beta > 0");
    std::ostream& os = c.report("ratio.csv");
    os << "z,t,ratio,tail_bound,q,C_t\n";
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j) {
            const double z = T.grid.z_nodes[i], t = T.grid.t_nodes[j];
            const auto rm = chaos::ratio_moment(T, z, t);
            os << num(z) << ',' << num(t) << ',' << num(rm.value) << ',' << num(rm.tail_bound) << ',' << num(rm.q) << ','
               << num(chaos::ratio_sup_bound(T, t)) << '\n';
        }
    // E[(u/u0 - 1)^2] = E[(u/u0)^2] - 1 grows with t at the chosen z
    const auto [iz, j0] = T.node(c.cfg.ratio.z, T.grid.t_nodes.front());
    (void)j0;
    const double z = T.grid.z_nodes[iz];
    for (int j = 0; j + 1 < T.nt(); ++j) {
        const double a = chaos::ratio_moment(T, z, T.grid.t_nodes[j]).value - 1;
        const double b = chaos::ratio_moment(T, z, T.grid.t_nodes[j + 1]).value - 1;
        c.add(T.n_levels(), z, T.grid.t_nodes[j], a, "ratio_minus_1_increasing_in_t", b);
    }
}

void monte_carlo(Context& c) {
    const auto& cfg = c.cfg;
    const mc::Ensemble E = mc::simulate(cfg.sim_scheme(), cfg.noise);
    const mc::MomentReport R = mc::estimate_moments(E);
    mc::write_csv(c.moments, R, c.moments_header);
    c.moments_header = false;
    const bool white_t = cfg.noise.temporal.is_white();
    const bool table_ok = cfg.noise.white() || (cfg.grid.nz <= 8 && cfg.grid.nt <= 8);
    if (!table_ok) {
        c.notes.push_back("mc: colored chaos tables allow at most 8 nodes per axis; reconciliation skipped");
        return;
    }
    const mc::Reconciliation rec = mc::compare_chaos_mc(R, table(c), cfg.tol.mc_gate);
    mc::write_csv(c.recon, rec, false);
    if (white_t) {
        c.add(rec.n_levels, cfg.grid.z_max, cfg.grid.t_max, 1 - rec.fraction_within(), "mc_outside_gate_fraction",
              1 - cfg.tol.mc_fraction);
    } else {
        c.notes.push_back("mc: colored-in-time reconciliation is reported, not asserted");
    }
}

void holder(Context& c) {
    const auto& H = c.cfg.holder;
    mc::SimScheme sc = c.cfg.sim_scheme();
    for (const auto& [a, b] : mc::dyadic_pairs(1, H.levels)) sc.pairs.push_back({a * H.z_top, b * H.z_top});
    sc.pair_t = H.t;
    const mc::Ensemble E = mc::simulate(sc, c.cfg.noise);
    const mc::HolderFit f = mc::estimate_holder(E, H.t, sc.pairs);
    std::ostream& os = c.report("holder.csv");
    os << "log_dz,log_mean_sq_increment,se_log\n";
    for (std::size_t k = 0; k < f.log_dz.size(); ++k)
        os << num(f.log_dz[k]) << ',' << num(f.log_m[k]) << ',' << num(f.log_se[k]) << '\n';
    std::ostream& fs = c.report("holder_fit.csv");
    fs << "slope,slope_se,ci_lo,ci_hi,intercept,n_pairs\n"
       << num(f.slope) << ',' << num(f.slope_se) << ',' << num(f.ci_lo) << ',' << num(f.ci_hi) << ',' << num(f.intercept)
       << ',' << f.n_pairs << '\n';
    c.add(0, H.z_top, H.t, H.theta, "holder_fitted_slope", f.slope);

    auto gen = noise::path_stream(c.cfg.seed, 0xd0);
    std::uniform_real_distribution<double> l(-4, 1);
    for (int k = 0; k < H.samples; ++k) {
        const double z1 = std::pow(10, l(gen)), z2 = std::pow(10, l(gen)), w = std::pow(10, l(gen)), s = std::pow(10, l(gen));
        c.add(0, z1, s, std::abs(kernel::q0(z1, w, s) - kernel::q0(z2, w, s)), "d0_kernel_bound",
              chaos::d0_bound(z1, z2, s));
    }
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw RunError("io: cannot write " + p.string());
    f << s;
    if (!f) throw RunError("io: write failed for " + p.string());
}

std::vector<std::string> split(const std::string& s, char d) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == d) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

int exit_status_from_ledger(std::istream& csv, double slack, std::size_t* violations) {
    std::string line;
    std::size_t bad = 0;
    if (!std::getline(csv, line) || line != "n,z,t,value,bound_name,bound_value,margin")
        throw RunError("ledger: missing or unexpected header");
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 7) throw RunError("ledger: malformed row '" + line + "'");
        const double v = std::strtod(f[3].c_str(), nullptr), b = std::strtod(f[5].c_str(), nullptr);
        bad += !(v <= b + (std::isfinite(b) ? slack * std::abs(b) : 0.0));
    }
    if (violations) *violations = bad;
    return bad == 0 ? 0 : 1;
}

RunSummary run(const ExperimentConfig& cfg) {
    validate(cfg);
    Context c{cfg};
    const Command cmd = cfg.command;
    const auto t0 = std::chrono::steady_clock::now();

    if (cmd == Command::identities || cmd == Command::all) stage(c, "kernel", "identities", [&] { identities(c); });
    if (cmd == Command::chaos || cmd == Command::bounds || cmd == Command::all)
        stage(c, "chaos", "table_and_bounds", [&] {
            write_table(c);
            chaos_rows(c, false);
            if (cmd != Command::chaos) lp_rows(c);
        });
    if (cmd == Command::ratio)
        stage(c, "chaos", "table_and_ratio", [&] {
            write_table(c);
            chaos_rows(c, true);
            ratio_rows(c);
        });
    if (cmd == Command::all && cfg.noise.beta > 0) stage(c, "chaos", "ratio", [&] { ratio_rows(c); });
    if (cmd == Command::mc || cmd == Command::all) stage(c, "montecarlo", "moments", [&] { monte_carlo(c); });
    if (cmd == Command::holder || (cmd == Command::all && cfg.noise.beta > 0.25))
        stage(c, "montecarlo", "holder", [&] { holder(c); });
    if (cmd == Command::all && !(cfg.noise.beta > 0.25)) c.notes.push_back("holder: needs beta > 1/4, skipped");

    std::ostringstream ledger;
    chaos::write_csv(ledger, chaos::BoundLedger{c.ledger, {}});
    std::ostringstream moments, recon;
    if (c.moments_header) chaos::write_header(moments);
    moments << c.moments.str();
    chaos::write_header(recon);
    recon << c.recon.str();

    namespace fs = std::filesystem;
    const fs::path out(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw RunError("io: cannot create " + out.string() + ": " + ec.message());

    RunSummary S;
    std::istringstream lin(ledger.str());
    S.exit_code = exit_status_from_ledger(lin, cfg.tol.bound_slack, &S.violations);
    S.ledger_rows = c.ledger.size();

    auto emit = [&](const std::string& name, const std::string& text) {
        write_file(out / name, text);
        S.files.push_back(name);
    };
    emit("ledger.csv", ledger.str());
    emit("moments.csv", moments.str());
    emit("reconciliation.csv", recon.str());
    for (const auto& r : c.reports) emit(r->name, r->text.str());

    std::ostringstream man;
    man << "# run manifest: the config block below reproduces every CSV byte-for-byte\n";
    man << "# library_version=" << kVersion << "\n";
    man << echo_config(cfg);
    for (const auto& k : chaos::fitted_constants()) man << "# constant." << k.name << '=' << num(k.value) << "  # " << k.provenance << '\n';
    for (const auto& n : c.notes) man << "# note: " << n << '\n';
    for (const auto& [m, s] : c.wall) man << "# wall." << m << '=' << num(s) << '\n';
    man << "# wall.total=" << num(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) << '\n';
    man << "# ledger_rows=" << S.ledger_rows << " violations=" << S.violations << " exit=" << S.exit_code << '\n';
    S.files.push_back("manifest.txt");
    for (const auto& f : S.files) man << "# file=" << f << '\n';
    write_file(out / "manifest.txt", man.str());
    return S;
}

}  // namespace kimura::cli
