// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers.
// Exit 0 iff every criterion passes or is reported as unattainable with its analysis.
#include <boost/math/special_functions/expint.hpp>
#include <chrono>
#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kimura/chaos.hpp"
#include "kimura/kernel.hpp"
#include "kimura/montecarlo.hpp"
#include "kimura/specfun.hpp"

using namespace kimura;

namespace {

struct Outcome {
    bool pass = false;
    bool unattainable = false;
    std::string detail;
};

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double logspace(double lo, double hi, int k, int n) { return lo * std::pow(hi / lo, double(k) / (n - 1)); }

// 1
Outcome mass_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const double z = logspace(1e-2, 10, i, 20), t = logspace(1e-2, 10, j, 20);
            worst = std::max(worst, rel(kernel::mass_q0_quadrature(z, t).value, -std::expm1(-z / t)));
        }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-6 && sec < 10, false, fmt("max rel residual %.2e (need <= 1e-6), %.1f s (need < 10)", worst, sec)};
}

// 2
Outcome energy_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0, Umax = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            const double z = logspace(1e-2, 10, i, 20), t = logspace(1e-2, 10, j, 20);
            const double U = kernel::energy_U(z / t);
            worst = std::max(worst, rel(kernel::energy_integral_quadrature(z, t), U));
            Umax = std::max(Umax, U);
        }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1e-5 && Umax <= 0.5 && sec < 60, false,
            fmt("max rel residual %.2e (need <= 1e-5), max U %.6f (need <= 1/2), %.1f s (need < 60)", worst, Umax, sec)};
}

// 3
Outcome semigroup() {
    std::mt19937_64 g(2024);
    std::uniform_real_distribution<double> u(-1.5, 0.5);
    double w_kernel = 0, w_prop = 0;
    const kernel::KernelParams k0{};
    auto ex = [](double x) { return std::exp(-x); };
    for (int i = 0; i < 20; ++i) {
        const double z = std::pow(10, u(g)), w = std::pow(10, u(g)), s = std::pow(10, u(g)), t = std::pow(10, u(g));
        w_kernel = std::max(w_kernel, rel(kernel::semigroup_compose(k0, z, w, s, t), kernel::q0(z, w, s + t)));
        w_prop = std::max(w_prop, rel(kernel::propagate_two_step(k0, ex, z, s, t).value, kernel::propagate(k0, ex, z, s + t).value));
    }
    return {w_kernel <= 1e-5 && w_prop <= 1e-5, false,
            fmt("20 draws: kernel composition max rel %.2e, two-step vs one-step propagation max rel %.2e (need <= 1e-5)",
                w_kernel, w_prop)};
}

// 4
Outcome duhamel() {
    const kernel::KernelParams k0{};
    const kernel::PotentialSpec V({0.1, 0.5, 1.0, 2.0, 4.0}, {1.0, -0.5, 0.3, -1.0, 0.8});
    double worst_margin = INFINITY;
    for (double t : {0.1, 0.2})
        for (double z : {0.2, 0.5, 1.0, 2.0})
            for (double w : {0.3, 0.8, 1.5}) {
                const auto r = kernel::duhamel_qV(k0, V, z, w, t, 3);
                worst_margin = std::min(worst_margin, std::expm1(t) + 1e-3 - std::abs(r.value / kernel::q0(z, w, t) - 1));
            }
    const double c = 0.7, t = 0.2;
    double worst_term = 0;
    for (auto [z, w] : {std::pair{1.0, 0.8}, std::pair{0.3, 0.5}}) {
        const auto r = kernel::duhamel_qV(k0, kernel::PotentialSpec::constant(c), z, w, t, 3);
        for (int k = 0; k < 3; ++k)
            worst_term = std::max(worst_term, rel(r.per_term[k], std::pow(c * t, k) / std::tgamma(k + 1.0) * kernel::q0(z, w, t)));
    }
    return {worst_margin >= 0 && worst_term <= 1e-4, false,
            fmt("|V| = 1, 24 (z, w, t) points: min margin to e^t - 1 + 1e-3 is %.3e; constant V terms max rel %.2e (need <= 1e-4)",
                worst_margin, worst_term)};
}

// 5
Outcome geometric() {
    const auto t0 = std::chrono::steady_clock::now();
    chaos::ChaosConfig c;
    c.n_levels = 5;
    c.grid = noise::FieldGrid::uniform(4, 32, 1, 32);
    const auto T = chaos::chaos_white(c);
    double worst = 0, total = 0;
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j) {
            for (int n = 1; n <= 5; ++n) worst = std::max(worst, T.M(n, i, j) / chaos::geometric_bound(n));
            const auto sm = chaos::second_moment(T, T.grid.z_nodes[i], T.grid.t_nodes[j]);
            total = std::max(total, sm.value + sm.tail_bound);
        }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst <= 1 + 1e-3 && total <= 2 && sec < 300, false,
            fmt("32x32 on (0,4]x(0,1]: max M_n 2^n = %.6f (need <= 1.001), max sum + tail = %.6f (need <= 2), %.0f s", worst,
                total, sec)};
}

// 6
Outcome refined_lp() {
    chaos::ChaosConfig c;
    c.n_levels = 5;
    c.beta = 0.25;
    c.grid = noise::FieldGrid::uniform(1, 4, 1, 4);
    const auto T = chaos::chaos_white(c);
    double worst = 0;
    bool monotone = true, finite = true;
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j) {
            const double z = T.grid.z_nodes[i], t = T.grid.t_nodes[j];
            for (int n = 1; n <= 5; ++n) worst = std::max(worst, T.M(n, i, j) / chaos::refined_bound(n, z, t));
            const auto lp = chaos::lp_bound(T, z, t, 4);
            for (std::size_t k = 1; k < lp.partial_sums.size(); ++k) monotone = monotone && lp.partial_sums[k] >= lp.partial_sums[k - 1];
            finite = finite && std::isfinite(lp.value());
        }
    // the level bounds sum to phi(C sqrt(pi t)) / sqrt z
    double phi_err = 0;
    for (double t : {0.01, 0.25, 0.5, 1.0}) {
        const double x = constants::energy_refined_C * std::sqrt(M_PI * t);
        const double s = 1 + chaos::series_tail(0, [&](int n) { return chaos::refined_bound(n, 1.0, t); });
        phi_err = std::max(phi_err, rel(s, chaos::phi_refined(x)));
        finite = finite && std::isfinite(chaos::phi_refined(x));
    }
    return {worst <= 1 && monotone && finite && phi_err < 1e-12, false,
            fmt("beta = 1/4, n <= 5: max M_n / refined bound %.4f (need <= 1); p = 4 partial sums monotone: %s; phi tail finite: "
                "%s (series vs phi rel %.1e)",
                worst, monotone ? "yes" : "no", finite ? "yes" : "no", phi_err)};
}

struct RatioCheck {
    bool sup_ok = true, decay_ok = true;
    double thr = 0, worst = 0, last = 0;
    int n_t = 0;
};

void ratio_sup(const chaos::ChaosTable& T, RatioCheck& r) {
    r.thr = chaos::ratio_threshold(T);
    for (double t : T.grid.t_nodes) {
        if (t > r.thr) continue;
        ++r.n_t;
        const double C = chaos::ratio_sup_bound(T, t);
        for (double z : T.grid.z_nodes) {
            const auto m = chaos::ratio_moment(T, z, t);
            r.worst = std::max(r.worst, (m.value + m.tail_bound) / C);
        }
    }
    r.sup_ok = r.n_t > 0 && r.worst <= 1;
}

void ratio_decay(const chaos::ChaosTable& T, double z, RatioCheck& r) {
    double prev = INFINITY;
    for (double t : {0.2, 0.1, 0.05, 0.025}) {
        const double v = chaos::ratio_moment(T, z, t).value - 1;
        r.decay_ok = r.decay_ok && v < prev;
        prev = v;
    }
    r.last = prev;
    r.decay_ok = r.decay_ok && prev < 0.05;
}

// 7
Outcome ratio() {
    RatioCheck w, cc;
    {
        chaos::ChaosConfig c;
        c.n_levels = 4;
        c.beta = 0.5;
        c.grid = noise::FieldGrid::uniform(2, 20, 0.2, 8);
        const auto T = chaos::chaos_white(c);
        ratio_sup(T, w);
        ratio_decay(T, 0.1, w);
    }
    const noise::NoiseModel m{noise::CovKernel::riesz(0.5), noise::CovKernel::riesz(0.5), 0.5};
    {
        // the colored threshold sits near t = 0.014, so the sup check needs its own small-t table
        chaos::ChaosConfig c;
        c.n_levels = 4;
        c.beta = 0.5;
        c.grid = noise::FieldGrid::uniform(0.4, 4, 0.014, 8);
        ratio_sup(chaos::chaos_colored(c, m), cc);
        c.grid = noise::FieldGrid::uniform(0.4, 4, 0.2, 8);
        ratio_decay(chaos::chaos_colored(c, m), 0.1, cc);
    }
    return {w.sup_ok && w.decay_ok && cc.sup_ok && cc.decay_ok, false,
            fmt("white: T = %.4g, %d t nodes below it, max ratio / C_t %.4f, decay %s, last %.4f; riesz/riesz: T = %.4g, %d "
                "t nodes, max ratio / C_t %.4f, decay %s, last %.4f (need < 0.05)",
                w.thr, w.n_t, w.worst, w.decay_ok ? "yes" : "no", w.last, cc.thr, cc.n_t, cc.worst, cc.decay_ok ? "yes" : "no",
                cc.last)};
}

// 8
Outcome boundary() {
    const double z = 1e-6, t = 0.5;
    const double r = chaos::level1_ratio_beta0(z, t);
    const double u = -std::expm1(-z / t);
    const double oracle = z * z / (4 * t * t) * boost::math::expint(1, 2 * z / t) / (u * u);
    // where the formula first reaches 10, by bisection in log z
    double lo = -30, hi = -6;
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (lo + hi);
        (chaos::level1_ratio_beta0(std::pow(10, mid), t) > 10 ? lo : hi) = mid;
    }
    chaos::ChaosConfig c;
    c.n_levels = 1;
    c.grid = noise::FieldGrid::uniform(z, 1, t, 1);
    const auto T = chaos::chaos_white(c);
    const double full = T.M(1, 0, 0) / (u * u);
    const bool pass = r > 10 && rel(r, oracle) < 1e-9;
    return {pass, !pass,
            fmt("formula gives %.4f at z = 1e-6, t = 0.5 (exponential-integral oracle %.4f), need > 10. Unattainable as stated: "
                "it grows by ln(100)/4 = 1.151 per factor 100 in z and first exceeds 10 at z = %.3g. It is a lower estimate; "
                "the level-1 ratio from the chaos engine is %.4f",
                r, oracle, std::pow(10, 0.5 * (lo + hi)), full)};
}

// 9
Outcome reconciliation() {
    const auto t0 = std::chrono::steady_clock::now();
    mc::SimScheme sc;
    sc.grid = noise::FieldGrid::uniform(4, 64, 0.5, 64);
    sc.n_paths = 10000;
    sc.seed = 2024;
    const auto R = mc::estimate_moments(mc::simulate(sc, noise::NoiseModel{}), {2});
    const double t_mc = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    chaos::ChaosConfig c;
    c.n_levels = 8;
    c.grid = sc.grid;
    const auto rec = mc::compare_chaos_mc(R, chaos::chaos_white(c), 3);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double f = rec.fraction_within();
    return {f >= 0.95 && sec < 600, false,
            fmt("64x64 nodes, 1e4 paths: %.2f%% within 3 SE + tail (need >= 95%%); %.0f s total, %.0f s Monte Carlo", 100 * f, sec,
                t_mc)};
}

// 10
Outcome holder() {
    mc::SimScheme sc;
    sc.grid = noise::FieldGrid::uniform(1, 4, 0.5, 4);
    sc.n_paths = 2000;
    sc.seed = 2024;
    sc.beta = 0.5;
    sc.dv = 1.0 / 256;
    sc.v_extend = 4;
    sc.pairs = mc::dyadic_pairs(1, 10);
    sc.pair_t = 0.5;
    const auto f = mc::estimate_holder(mc::simulate(sc, noise::NoiseModel{}), 0.5, sc.pairs);
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> l(-4, 1);
    double worst = 0;
    for (int k = 0; k < 1000; ++k) {
        const double z1 = std::pow(10, l(g)), z2 = std::pow(10, l(g)), w = std::pow(10, l(g)), s = std::pow(10, l(g));
        worst = std::max(worst, std::abs(kernel::q0(z1, w, s) - kernel::q0(z2, w, s)) / chaos::d0_bound(z1, z2, s));
    }
    return {f.slope >= 0.2 && worst <= 1, false,
            fmt("beta = 1/2, t = 0.5, %d dyadic pairs to 2^-10: slope %.3f, 95%% CI [%.3f, %.3f] (need >= 0.2); "
                "1000 kernel samples: max |d0| / bound %.4f with M = %.4f",
                f.n_pairs, f.slope, f.ci_lo, f.ci_hi, worst, constants::holder_M)};
}

// 11
Outcome specfun_suite() {
    double kummer = 0;
    for (double lx = -8; lx <= std::log10(50.0) + 1e-12; lx += 0.05) {
        const double x = std::pow(10, lx);
        kummer = std::max(kummer, rel(specfun::pfq({{1}, {2}}, x), std::expm1(x) / x));
    }
    double ig = 0;
    for (int a = 1; a <= 6; ++a)
        for (double z = 0; z <= 30; z += 0.25) ig = std::max(ig, specfun::incomplete_gamma_pfq_residual(a, z));
    double bp = 0;
    for (double x : {0.0, 0.3, 1.0, 10.0, 29.0, 31.0, 100.0}) bp = std::max(bp, specfun::bessel_i_prime_identity_check(x, 1e-5));
    const specfun::HypergeometricSpec f{{1.5, 1}, {2, 3}};
    double sup = 0;
    bool finite = true;
    for (double k : {0.0, 1.0, 2.0})
        for (double lx = 0; lx <= 4 + 1e-9; lx += 0.01) {
            const double v = specfun::pfq_scaled(f, std::pow(10, lx), k);
            finite = finite && std::isfinite(v);
            sup = std::max(sup, v);
        }
    return {kummer <= 1e-10 && ig <= 1e-8 && bp <= 1e-6 && finite, false,
            fmt("1F1[1;2] max rel %.1e (need <= 1e-10); incomplete gamma residual %.1e (need <= 1e-8); I0' = I1 residual %.1e "
                "(need <= 1e-6); scaled 2F2 sup over [1, 1e4], k in {0,1,2}: %.4f, finite: %s",
                kummer, ig, bp, sup, finite ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> all = {mass_identity, energy_identity, semigroup,      duhamel,
                                                       geometric,     refined_lp,      ratio,          boundary,
                                                       reconciliation, holder,         specfun_suite};
    // optional list of criterion numbers to run
    std::vector<int> pick;
    for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
    int failed = 0, unattainable = 0, passed = 0;
    for (std::size_t k = 0; k < all.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!pick.empty() && std::find(pick.begin(), pick.end(), id) == pick.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = all[k]();
        } catch (const std::exception& e) {
            o = {false, false, std::string("error: ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %d: %s%s - %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.unattainable ? " (unattainable as stated)" : "",
                    o.detail.c_str(), sec);
        std::fflush(stdout);
        passed += o.pass;
        unattainable += !o.pass && o.unattainable;
        failed += !o.pass && !o.unattainable;
    }
    std::printf("summary: %d PASS, %d FAIL (%d unattainable as stated, %d unexpected)\n", passed, failed + unattainable,
                unattainable, failed);
    return failed == 0 ? 0 : 1;
}
