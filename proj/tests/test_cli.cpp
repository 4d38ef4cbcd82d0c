#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kimura/cli.hpp"

using namespace kimura;
using namespace kimura::cli;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> issues_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.issues;
    }
    return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kimura_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

const char* kSmall =
    "grid.z_max = 2\n"
    "grid.nz = 4\n"
    "grid.t_max = 0.5\n"
    "grid.nt = 4\n"
    "chaos.levels = 4\n"
    "mc.paths = 400\n"
    "identities.nz = 3\n"
    "identities.nt = 3\n"
    "identities.semigroup = 3\n";

ExperimentConfig small(Command c, const std::string& out, const std::string& extra = "") {
    ExperimentConfig cfg = parse_config(std::string(kSmall) + extra);
    cfg.command = c;
    cfg.out = out;
    return cfg;
}

}  // namespace

// ----- parse_config -----

TEST(Config, MinimalWhiteConfigGetsDefaults) {
    const ExperimentConfig c = parse_config("noise.beta = 0\n");
    EXPECT_EQ(c.command, Command::all);
    EXPECT_TRUE(c.noise.white());
    EXPECT_EQ(c.quad.rel_tol, 1e-6);
    EXPECT_EQ(c.tol.bound_slack, 1e-3);
    EXPECT_EQ(c.tol.mc_gate, 3.0);
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.chaos.levels, 5);
    EXPECT_EQ(c.grid.nz, 8);
    // comments, blank lines, spaces
    const ExperimentConfig d = parse_config("# header\n\n  noise.spatial.kind = riesz   # inline\nnoise.spatial.h=0.25\n");
    EXPECT_EQ(d.noise.spatial.kind, noise::Kind::riesz);
    EXPECT_EQ(d.noise.spatial.h, 0.25);
}

TEST(Config, NegativeBetaNamesTheKey) {
    const auto v = issues_of("noise.beta=-1\n");
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].rfind("noise.beta:", 0), 0u) << v[0];
}

TEST(Config, DuplicateKeyCitesBothLines) {
    const auto v = issues_of("seed=3\nnoise.beta=0\nseed=4\n");
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find("seed"), std::string::npos);
    EXPECT_NE(v[0].find("lines 1 and 3"), std::string::npos) << v[0];
}

TEST(Config, CollectsEveryViolation) {
    const auto v = issues_of("bogus.key=1\nmc.paths=many\nchaos.eps=0\nnoise.spatial.kind=pink\nnot a pair\nnoise.beta=-2\n");
    EXPECT_EQ(v.size(), 6u);
    EXPECT_TRUE(any_contains(v, "bogus.key: unknown key"));
    EXPECT_TRUE(any_contains(v, "mc.paths: expected an integer"));
    EXPECT_TRUE(any_contains(v, "chaos.eps: must be finite and > 0"));
    EXPECT_TRUE(any_contains(v, "noise.spatial.kind: expected one of"));
    EXPECT_TRUE(any_contains(v, "line 5: expected key=value"));
    EXPECT_TRUE(any_contains(v, "noise.beta:"));
}

TEST(Config, CrossKeyChecksUseModuleValidators) {
    // one output step with one substep: internal step too coarse for the first node
    auto v = issues_of("grid.nt=1\nmc.substeps=1\ncommand=mc\n");
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].rfind("mc:", 0), 0u) << v[0];
    v = issues_of("command=ratio\n");
    EXPECT_TRUE(any_contains(v, "noise.beta: the ratio command needs beta > 0"));
    v = issues_of("command=ratio\nnoise.beta=0.5\nratio.z=0.3\n");
    EXPECT_TRUE(any_contains(v, "ratio.z: 0.3 is not a grid z node"));
    v = issues_of("noise.spatial.kind=riesz\ngrid.nz=9\ncommand=chaos\n");
    EXPECT_TRUE(any_contains(v, "chaos:"));
    v = issues_of("quad.target_rel_tol=1e-3\n");
    EXPECT_TRUE(any_contains(v, "quad.target_rel_tol"));
    v = issues_of("noise.spatial.kind=tabulated\nnoise.spatial.x=0,1\nnoise.spatial.f=1\n");
    EXPECT_TRUE(any_contains(v, "noise:"));
    // chaos limits do not apply to a command that never builds a table
    EXPECT_TRUE(issues_of("noise.spatial.kind=riesz\ngrid.nz=9\ncommand=identities\n").empty());
}

TEST(Config, EchoRoundTrips) {
    const ExperimentConfig c = parse_config(
        "noise.beta=0.3\nnoise.spatial.kind=tabulated\nnoise.spatial.x=0,0.5,2\nnoise.spatial.f=1,0.4,0\n"
        "noise.temporal.kind=exponential\nnoise.temporal.ell=0.7\nseed=18446744073709551615\nmc.dv=0.1\n"
        "command=bounds\nout=elsewhere\n");
    const std::string e = echo_config(c);
    EXPECT_EQ(echo_config(parse_config(e)), e);
    EXPECT_NE(e.find("noise.spatial.x=0,0.5,2\n"), std::string::npos);
    EXPECT_NE(e.find("seed=18446744073709551615\n"), std::string::npos);
    EXPECT_NE(e.find("mc.dv=0.1\n"), std::string::npos);
    EXPECT_NE(e.find("command=bounds\n"), std::string::npos);
}

// ----- exit status -----

TEST(Ledger, ExitStatusFromCsv) {
    const std::string h = "n,z,t,value,bound_name,bound_value,margin\n";
    auto code = [&](const std::string& rows, double slack, std::size_t* bad = nullptr) {
        std::istringstream is(h + rows);
        return exit_status_from_ledger(is, slack, bad);
    };
    EXPECT_EQ(code("", 0), 0);
    EXPECT_EQ(code("1,1,1,0.5,b,0.5,0\n", 0), 0);
    EXPECT_EQ(code("1,1,1,0.5005,b,0.5,-0.0005\n", 1e-3), 0);
    EXPECT_EQ(code("1,1,1,0.5006,b,0.5,-0.0006\n", 1e-3), 1);
    EXPECT_EQ(code("1,1,1,1e300,b,inf,inf\n", 0), 0);
    std::size_t bad = 0;
    EXPECT_EQ(code("1,1,1,nan,b,1,nan\n1,1,1,2,b,1,-1\n1,1,1,0,b,1,1\n", 0, &bad), 1);
    EXPECT_EQ(bad, 2u);
    std::istringstream wrong("a,b\n");
    EXPECT_THROW(exit_status_from_ledger(wrong, 0), RunError);
    std::istringstream short_row(h + "1,2,3\n");
    EXPECT_THROW(exit_status_from_ledger(short_row, 0), RunError);
}

// ----- run -----

TEST(Run, IdentitiesExitZeroWithResidualsUnderTolerance) {
    const fs::path out = scratch("identities");
    const RunSummary s = run(small(Command::identities, out.string()));
    EXPECT_EQ(s.exit_code, 0);
    EXPECT_EQ(s.violations, 0u);
    std::istringstream csv(slurp(out / "identities.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "identity,z,w,s,t,closed_form,quadrature,rel_residual");
    int n = 0;
    while (std::getline(csv, line)) {
        EXPECT_LE(std::stod(line.substr(line.rfind(',') + 1)), 1e-6) << line;
        ++n;
    }
    EXPECT_EQ(n, 3 * 3 * 2 + 3);
    for (const char* f : {"ledger.csv", "moments.csv", "reconciliation.csv", "manifest.txt"}) EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Run, WhiteBetaZeroBoundsHaveNonNegativeMargins) {
    const fs::path out = scratch("bounds");
    const RunSummary s = run(small(Command::bounds, out.string(), "noise.beta=0\n"));
    EXPECT_EQ(s.exit_code, 0);
    std::istringstream csv(slurp(out / "ledger.csv"));
    std::string line;
    std::getline(csv, line);
    int geometric = 0, total = 0;
    while (std::getline(csv, line)) {
        const bool g = line.find(",geometric_2^-n,") != std::string::npos, t = line.find(",sum_le_2,") != std::string::npos;
        if (!g && !t) continue;
        geometric += g;
        total += t;
        EXPECT_GE(std::stod(line.substr(line.rfind(',') + 1)), 0.0) << line;
    }
    EXPECT_EQ(geometric, 16 * 4);
    EXPECT_EQ(total, 16);
}

TEST(Run, SameSeedGivesByteIdenticalCsvs) {
    const fs::path a = scratch("det_a"), b = scratch("det_b"), c = scratch("det_c"), d = scratch("det_d");
    ExperimentConfig cfg = small(Command::mc, a.string());
    cfg.threads = 1;
    run(cfg);
    cfg.out = b.string();
    cfg.threads = 3;
    run(cfg);
    // the manifest alone reproduces the run
    ExperimentConfig again = parse_config(slurp(b / "manifest.txt"));
    again.out = c.string();
    run(again);
    cfg.out = d.string();
    cfg.seed = 2;
    run(cfg);
    for (const char* f : {"ledger.csv", "moments.csv", "reconciliation.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
    }
    EXPECT_NE(slurp(a / "moments.csv"), slurp(d / "moments.csv"));
    const std::string m = slurp(a / "moments.csv");
    EXPECT_EQ(m.find('\r'), std::string::npos);
}

TEST(Run, ExitStatusIsRecomputableFromTheLedger) {
    const fs::path out = scratch("exit");
    // demanding a slope no field reaches makes the slope row fail; the kernel rows still hold
    ExperimentConfig cfg = small(Command::holder, out.string(), "holder.theta=5\nholder.samples=50\n");
    const RunSummary s = run(cfg);
    std::ifstream f(out / "ledger.csv");
    std::size_t bad = 0;
    EXPECT_EQ(exit_status_from_ledger(f, cfg.tol.bound_slack, &bad), s.exit_code);
    EXPECT_EQ(bad, s.violations);
    EXPECT_EQ(s.exit_code, 1);
    EXPECT_EQ(s.violations, 1u);
}

TEST(Run, ModuleErrorsCarryModuleAndParameters) {
    const fs::path out = scratch("error");
    // an asymmetric tabulated covariance passes parsing but is rejected by the colored engine
    ExperimentConfig cfg =
        small(Command::chaos, out.string(), "noise.spatial.kind=tabulated\nnoise.spatial.x=-1,0,1\nnoise.spatial.f=1,1,0\n");
    try {
        run(cfg);
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        const std::string w = e.what();
        EXPECT_EQ(w.rfind("chaos:", 0), 0u) << w;
        EXPECT_NE(w.find("spatial=tabulated"), std::string::npos) << w;
        EXPECT_NE(w.find("seed=1"), std::string::npos) << w;
    }
}
