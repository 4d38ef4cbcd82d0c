// Experiment runner: flat key=value configuration, dispatch, CSV reports and the bound ledger.
#pragma once

#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kimura/chaos.hpp"
#include "kimura/kernel.hpp"
#include "kimura/montecarlo.hpp"
#include "kimura/noise.hpp"

namespace kimura::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { identities, chaos, mc, ratio, holder, bounds, all };
const char* command_name(Command c);
bool parse_command(const std::string& s, Command& out);

struct GridSection {
    double z_max = 4;
    int nz = 8;
    double t_max = 0.5;
    int nt = 8;
};

struct QuadSection {
    double rel_tol = 1e-6;          // tolerance the identity residuals are held to
    double target_rel_tol = 1e-10;  // accuracy requested from the adaptive rules
    int base_points = 16;
    double trunc_c = 8;
};

struct ChaosSection {
    int levels = 5;
    double eps = 0.25;
    int x_per_decade = 24;
    int t_per_decade = 6;
    int colored_refine = 2;
};

struct McSection {
    int paths = 1000;
    int substeps = 4;
    double dv = 1.0 / 64;
    double v_extend = 5;
    double theta = mc::hurwitz_theta;
};

// (z, t) log grid for the mass and energy identities; random Chapman-Kolmogorov draws.
struct IdentitiesSection {
    int nz = 20, nt = 20;
    double lo = 1e-2, hi = 10;
    int semigroup = 20;
};

struct RatioSection {
    double z = 0.5;  // grid node for the decay-in-t rows
};

struct HolderSection {
    double t = 0.5;
    double z_top = 1;     // pairs (z_top 2^-k, z_top 2^-k+1), k = 1..levels
    int levels = 10;
    double theta = 0.2;   // required lower bound on the fitted slope
    int samples = 1000;   // random kernel-difference draws
};

struct TolSection {
    double bound_slack = 1e-3;  // relative
    double mc_gate = 3;         // in standard errors
    double mc_fraction = 0.95;  // share of nodes that must pass the gate
};

struct ExperimentConfig {
    Command command = Command::all;
    std::string out = "out";
    std::uint64_t seed = 1;
    int threads = 0;
    kernel::KernelParams kernel;
    QuadSection quad;
    noise::NoiseModel noise;
    GridSection grid;
    ChaosSection chaos;
    McSection mc;
    IdentitiesSection identities;
    RatioSection ratio;
    HolderSection holder;
    TolSection tol;

    noise::FieldGrid field_grid() const;
    kernel::QuadratureSpec quad_spec() const;
    chaos::ChaosConfig chaos_config() const;
    mc::SimScheme sim_scheme() const;
};

// Every violation found in one pass, each prefixed with its key path.
struct ConfigError : std::runtime_error {
    std::vector<std::string> issues;
    explicit ConfigError(std::vector<std::string> v);
};

ExperimentConfig parse_config(const std::string& text);
// Cross-key checks through the modules' own validators; throws ConfigError.
void validate(const ExperimentConfig& cfg);
// Every key with its resolved value; parse_config(echo_config(c)) reproduces c.
std::string echo_config(const ExperimentConfig& cfg);

// A stage failure, tagged with the module and the parameters it ran with.
struct RunError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunSummary {
    int exit_code = 0;
    std::size_t ledger_rows = 0, violations = 0;
    std::vector<std::string> files;
};

// Writes ledger.csv, moments.csv, reconciliation.csv, manifest.txt (+ per-command reports) under cfg.out.
RunSummary run(const ExperimentConfig& cfg);

// Exit status recomputed from ledger CSV text: 0 iff value <= bound (1 + slack) on every row.
int exit_status_from_ledger(std::istream& csv, double slack, std::size_t* violations = nullptr);

}  // namespace kimura::cli
