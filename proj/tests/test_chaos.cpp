#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <cmath>
#include <random>
#include <regex>
#include <sstream>

#include "kimura/chaos.hpp"

using namespace kimura;
using namespace kimura::chaos;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }
double u0sq(double z, double t) { return std::pow(-std::expm1(-z / t), 2); }

// coarse internal tables: ~1% on deep levels, enough wherever a bound has slack
EngineSpec fast() {
    EngineSpec e;
    e.x_per_decade = 8;
    e.t_per_decade = 2;
    e.t_decades = 4;
    return e;
}

const ChaosTable& white0() {
    static const ChaosTable t = [] {
        ChaosConfig c;
        c.n_levels = 5;
        c.grid = noise::FieldGrid::uniform(4, 16, 0.5, 8);
        return chaos_white(c);
    }();
    return t;
}

const ChaosTable& white_quarter() {
    static const ChaosTable t = [] {
        ChaosConfig c;
        c.n_levels = 5;
        c.beta = 0.25;
        c.grid = noise::FieldGrid::uniform(1, 4, 1, 4);
        c.engine = fast();
        return chaos_white(c);
    }();
    return t;
}

// t nodes 0.025 .. 0.2, z nodes 0.1 .. 2
const ChaosTable& white_half() {
    static const ChaosTable t = [] {
        ChaosConfig c;
        c.n_levels = 4;
        c.beta = 0.5;
        c.grid = noise::FieldGrid::uniform(2, 20, 0.2, 8);
        c.engine = fast();
        return chaos_white(c);
    }();
    return t;
}

noise::NoiseModel riesz_model() {
    return {noise::CovKernel::riesz(0.5), noise::CovKernel::riesz(0.5), 0.0};
}

const ChaosTable& colored_riesz() {
    static const ChaosTable t = [] {
        ChaosConfig c;
        c.n_levels = 4;
        c.grid = noise::FieldGrid::uniform(1, 4, 0.2, 4);
        return chaos_colored(c, riesz_model());
    }();
    return t;
}
}  // namespace

// ----- white, beta = 0 -----

TEST(ChaosWhite, LevelZeroClosedForm) {
    const auto& T = white0();
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j)
            EXPECT_DOUBLE_EQ(T.M(0, i, j), u0sq(T.grid.z_nodes[i], T.grid.t_nodes[j]));
}

TEST(ChaosWhite, GeometricBound) {
    const auto& T = white0();
    for (int n = 1; n <= 5; ++n)
        for (int i = 0; i < T.nz(); ++i)
            for (int j = 0; j < T.nt(); ++j) {
                EXPECT_GE(T.M(n, i, j), 0);
                EXPECT_LE(T.M(n, i, j), std::ldexp(1.0, -n) * (1 + 1e-3)) << n << ' ' << i << ' ' << j;
            }
}

TEST(ChaosWhite, FirstLevelBelowEnergy) {
    const auto& T = white0();
    for (int i = 0; i < T.nz(); ++i)
        for (int j = 0; j < T.nt(); ++j) {
            const double x = T.grid.z_nodes[i] / T.grid.t_nodes[j];
            EXPECT_LE(T.M(1, i, j), kernel::energy_U(x) * (1 + 1e-6));
        }
}

TEST(ChaosWhite, SecondMomentAtMostTwo) {
    const auto& T = white0();
    for (double z : T.grid.z_nodes)
        for (double t : T.grid.t_nodes) {
            const auto sm = second_moment(T, z, t);
            EXPECT_LE(sm.value + sm.tail_bound, 2.0);
            EXPECT_EQ(sm.tail_source, "geometric");
        }
}

// beta = 0 moments depend on z / t only
TEST(ChaosWhite, ScaleInvariance) {
    const auto& T = white0();
    for (int n = 1; n <= 5; ++n) {
        EXPECT_NEAR(T.M(n, 3, 3), T.M(n, 7, 7), 1e-9);  // (1, 0.25), (2, 0.5)
        EXPECT_NEAR(T.M(n, 1, 1), T.M(n, 3, 3), 1e-9);  // (0.5, 0.125)
    }
}

// relative gap to u0^2 shrinks as t -> 0 along the grid
TEST(ChaosWhite, SmallTimeLimit) {
    const auto& T = white0();
    for (double z : {0.5, 1.0, 4.0}) {
        double prev = INFINITY;
        for (int j = T.nt() - 1; j >= 0; --j) {
            const double t = T.grid.t_nodes[j];
            const double gap = second_moment(T, z, t).value / u0sq(z, t) - 1;
            EXPECT_LT(gap, prev);
            prev = gap;
        }
        EXPECT_LT(prev, 0.2);
    }
}

TEST(ChaosWhite, RefinementStudy) {
    ChaosConfig c;
    c.n_levels = 3;
    c.grid = noise::FieldGrid::uniform(2, 4, 0.5, 2);
    const ChaosTable a = chaos_white(c);
    c.engine.x_per_decade *= 2;
    c.engine.tau_points += 4;
    c.engine.w_points += 4;
    const ChaosTable b = chaos_white(c);
    // 4x the reported 1e-6 quadrature tolerance
    for (int n = 1; n <= 3; ++n)
        for (int i = 0; i < a.nz(); ++i)
            for (int j = 0; j < a.nt(); ++j) EXPECT_LT(rel(a.M(n, i, j), b.M(n, i, j)), 4e-6);
}

TEST(ChaosWhite, ThreadCountDoesNotChangeValues) {
    ChaosConfig c;
    c.n_levels = 2;
    c.grid = noise::FieldGrid::uniform(2, 4, 0.5, 2);
    c.engine.threads = 1;
    const ChaosTable a = chaos_white(c);
    c.engine.threads = 3;
    const ChaosTable b = chaos_white(c);
    EXPECT_EQ(a.levels, b.levels);
}

TEST(ChaosWhite, Errors) {
    ChaosConfig c;
    c.grid = noise::FieldGrid::uniform(1, 2, 1, 2);
    c.n_levels = 13;
    EXPECT_THROW(chaos_white(c), DomainError);
    c.n_levels = 2;
    c.beta = -1;
    EXPECT_THROW(chaos_white(c), DomainError);
    EXPECT_THROW(white0().node(0.3, 0.5), DomainError);
    EXPECT_THROW(white0().node(1, 0.3), DomainError);
    EXPECT_THROW(ratio_moment(white0(), 1, 0.5), DomainError);
}

// ----- degenerate white -----

TEST(ChaosWhite, RefinedBoundQuarter) {
    const auto& T = white_quarter();
    for (int n = 1; n <= 5; ++n)
        for (double z : T.grid.z_nodes)
            for (double t : T.grid.t_nodes) {
                const auto [i, j] = T.node(z, t);
                EXPECT_LE(T.M(n, i, j), refined_bound(n, z, t)) << n << ' ' << z << ' ' << t;
            }
}

// the refined sequence decays factorially, so it eventually undercuts 2^-n at every z <= 1
TEST(ChaosWhite, RefinedEventuallyTighter) {
    for (double z : {1.0 / 64, 0.25, 1.0})
        for (double t : {0.25, 1.0}) {
            int n = 1;
            while (refined_bound(n, z, t) >= geometric_bound(n)) ++n;
            for (int m = n; m < n + 20; ++m) EXPECT_LT(refined_bound(m, z, t), geometric_bound(m));
        }
}

TEST(ChaosWhite, RefinedSeriesClosedForm) {
    for (double t : {0.01, 0.3, 1.0}) {
        const double x = constants::energy_refined_C * std::sqrt(M_PI * t);
        const double s = 1 + series_tail(0, [&](int n) { return refined_bound(n, 1.0, t); });
        EXPECT_NEAR(s, phi_refined(x), 1e-13 * phi_refined(x));
        EXPECT_TRUE(std::isfinite(s));
    }
}

// int_0^t K(z, tau, t) dtau u0(z, t)^2 reproduces the level-1 entry
TEST(ChaosWhite, LevelOneFromK) {
    const auto& T = white_half();
    kernel::QuadratureSpec q;
    q.rel_tol = 1e-9;
    for (auto [z, t] : {std::pair{0.5, 0.2}, std::pair{0.1, 0.1}, std::pair{2.0, 0.05}}) {
        // tau = t - s^2 removes the (t - tau)^{-1/2} endpoint singularity
        auto f = [&](double s) { return t - s * s < t ? 2 * s * K_function(z, t - s * s, t, 1.0, q) : 0.0; };
        const double k = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, std::sqrt(t), 8, 1e-9);
        const auto [i, j] = T.node(z, t);
        EXPECT_LT(rel(k * u0sq(z, t), T.M(1, i, j)), 1e-6) << z << ' ' << t;
    }
}

TEST(ChaosRatio, DecaysAlongDyadicTimes) {
    const auto& T = white_half();
    for (double z : {0.1, 1.0, 2.0}) {
        double prev = INFINITY;
        for (double t : {0.2, 0.1, 0.05, 0.025}) {
            const auto r = ratio_moment(T, z, t);
            EXPECT_GT(r.value, 1);
            EXPECT_LT(r.value - 1, prev);
            prev = r.value - 1;
        }
        if (z == 0.1) EXPECT_LT(prev, 0.05);
    }
}

TEST(ChaosRatio, SupBelowCtBelowThreshold) {
    const auto& T = white_half();
    const double thr = ratio_threshold(T);
    EXPECT_GE(thr, 0.05 - 1e-12);
    for (double t : T.grid.t_nodes) {
        if (t > thr) {
            EXPECT_FALSE(std::isfinite(ratio_sup_bound(T, t)));
            continue;
        }
        const double C = ratio_sup_bound(T, t);
        for (double z : T.grid.z_nodes) {
            const auto r = ratio_moment(T, z, t);
            EXPECT_LE(r.value + r.tail_bound, C) << z << ' ' << t;
        }
    }
}

TEST(ChaosRatio, BoundaryNegativeControl) {
    for (double t : {0.1, 0.5}) {
        double prev = 0;
        for (double z : {1e-2, 1e-4, 1e-6}) {
            const double r = level1_ratio_beta0(z, t);
            const double want = z * z / (4 * t * t) * boost::math::expint(1, 2 * z / t) / u0sq(z, t);
            EXPECT_LT(rel(r, want), 1e-9);
            EXPECT_GT(r, prev);
            prev = r;
        }
    }
    // logarithmic growth: E1(a) ~ -gamma - log a, so each factor 100 in z adds log(100)/4
    EXPECT_NEAR(level1_ratio_beta0(1e-6, 0.5) - level1_ratio_beta0(1e-4, 0.5), std::log(100.0) / 4, 1e-3);
    EXPECT_LT(level1_ratio_beta0(1e-6, 0.5), 10);
    EXPECT_GT(level1_ratio_beta0(1e-19, 0.5), 10);
}

// the closed form is a lower estimate of the true level-1 ratio
TEST(ChaosRatio, NegativeControlBelowTable) {
    const auto& T = white0();
    for (double z : {0.25, 1.0, 4.0}) {
        const auto [i, j] = T.node(z, 0.5);
        EXPECT_LE(level1_ratio_beta0(z, 0.5), T.M(1, i, j) / u0sq(z, 0.5));
    }
}

// ----- K, K-tilde -----

TEST(ChaosK, SpecPoint) {
    const double k = K_function(0.5, 0.2, 0.4, 1.0);
    EXPECT_GT(k, 0);
    EXPECT_LE(k, K_bound(0.5, 0.2, 0.4, 1.0));
}

TEST(ChaosK, FiniteAsTauVanishes) {
    const double k = K_function(0.5, 1e-10, 0.4, 1.0);
    EXPECT_TRUE(std::isfinite(k));
    EXPECT_LE(k, K_bound(0.5, 1e-10, 0.4, 1.0));
    // u0(w, tau) -> 1 away from w = 0, so K settles to a finite limit
    EXPECT_LT(rel(k, K_function(0.5, 1e-7, 0.4, 1.0)), 1e-3);
}

TEST(ChaosK, BoundsOnRandomSamples) {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> lz(-3, std::log10(4.0)), lt(-2, 0), f(0.01, 0.99);
    for (double beta : {0.25, 0.5, 0.75})
        for (int k = 0; k < 40; ++k) {
            const double z = std::pow(10, lz(g)), t = std::pow(10, lt(g)), tau = f(g) * t;
            EXPECT_LE(K_function(z, tau, t, 2 * beta), K_bound(z, tau, t, 2 * beta));
            EXPECT_LE(K_tilde(z, tau, t, beta), K_tilde_bound(z, tau, t, beta));
        }
}

TEST(ChaosK, DomainErrors) {
    EXPECT_THROW(K_function(0.5, 0.4, 0.4, 1.0), DomainError);
    EXPECT_THROW(K_function(0.0, 0.1, 0.4, 1.0), DomainError);
    EXPECT_THROW(K_tilde(0.5, 0.1, 0.4, 0.0), DomainError);
}

// ----- L^p -----

TEST(ChaosLp, PTwoIsTheL2Norm) {
    const auto& T = white_quarter();
    for (double z : T.grid.z_nodes) {
        const auto b = lp_bound(T, z, 0.5, 2);
        const auto sm = second_moment(T, z, 0.5);
        EXPECT_DOUBLE_EQ(b.partial, std::sqrt(sm.value));
        EXPECT_NEAR(b.value(), std::sqrt(sm.value + sm.tail_bound), 1e-15);
    }
}

TEST(ChaosLp, QuarterPFour) {
    const auto& T = white_quarter();
    for (double z : T.grid.z_nodes)
        for (double t : T.grid.t_nodes) {
            const auto b = lp_bound(T, z, t, 4);
            ASSERT_EQ(b.partial_sums.size(), 6u);
            for (std::size_t n = 1; n < b.partial_sums.size(); ++n) EXPECT_GT(b.partial_sums[n], b.partial_sums[n - 1]);
            EXPECT_TRUE(std::isfinite(b.tail));
            const auto [i, j] = T.node(z, t);
            for (int n = 1; n <= 5; ++n)
                EXPECT_LE(std::pow(3.0, 0.5 * n) * std::sqrt(T.M(n, i, j)), lp_level_bound_white(n, z, t, 4));
        }
}

TEST(ChaosLp, NaiveSeriesDivergesBelowQuarter) {
    EXPECT_THROW(lp_bound(white0(), 1, 0.5, 3), DomainError);
    EXPECT_THROW(lp_bound(white0(), 1, 0.5, 1.5), DomainError);
    EXPECT_TRUE(std::isfinite(lp_bound(white0(), 1, 0.5, 2).value()));
    try {
        lp_bound(white0(), 1, 0.5, 4);
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("diverges"), std::string::npos);
    }
}

// ----- continuity -----

TEST(ChaosHolder, EqualPointsVanish) {
    const auto h = holder_modulus(0.3, 0.3, 0.5, 0.5, 0.4);
    EXPECT_EQ(h.Q, 0);
    EXPECT_EQ(h.Q_tilde, 0);
    EXPECT_EQ(difference_moment(white_half(), 0.3, 0.3, 0.1), 0);
}

TEST(ChaosHolder, BoundsHold) {
    for (double t : {0.1, 0.5, 1.0})
        for (auto [a, b] : {std::pair{1.0 / 1024, 1.0 / 512}, std::pair{0.01, 0.5}, std::pair{0.3, 0.31}, std::pair{1.0, 4.0}}) {
            const auto h = holder_modulus(a, b, t, 0.5, 0.4);
            EXPECT_LE(h.Q, h.bound_Q);
            EXPECT_LE(h.Q_tilde, h.bound_Q_tilde);
            EXPECT_NEAR(h.eta, 0.05, 1e-15);
        }
}

TEST(ChaosHolder, DyadicSlope) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = 10;
    for (int k = 1; k <= n; ++k) {
        const double z1 = std::ldexp(1.0, -k), z2 = 2 * z1;
        const double x = std::log(z2 - z1), y = std::log(holder_modulus(z1, z2, 0.5, 0.5, 0.4).Q);
        sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_GE(slope, 0.2);
}

TEST(ChaosHolder, DomainErrors) {
    EXPECT_THROW(holder_modulus(0.1, 0.2, 0.5, 0.25, 0.0), DomainError);
    EXPECT_THROW(holder_modulus(0.1, 0.2, 0.5, 0.5, 0.6), DomainError);
    EXPECT_THROW(holder_modulus(0.1, 0.2, 0.5, 0.3, 0.25), DomainError);  // 4 beta - 1 = 0.2
    EXPECT_THROW(holder_modulus(0.1, 0.2, 0.5, 0.5, -0.1), DomainError);
}

TEST(ChaosHolder, KernelDifferenceBound) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> l(-4, 1);
    for (int k = 0; k < 1000; ++k) {
        const double z1 = std::pow(10, l(g)), z2 = std::pow(10, l(g)), w = std::pow(10, l(g)), s = std::pow(10, l(g));
        const double d = std::abs(kernel::q0(z1, w, s) - kernel::q0(z2, w, s));
        EXPECT_LE(d, d0_bound(z1, z2, s) * (1 + 1e-12)) << z1 << ' ' << z2 << ' ' << w << ' ' << s;
    }
}

TEST(ChaosHolder, DifferenceMomentShape) {
    const auto& T = white_half();
    const double a = difference_moment(T, 0.1, 0.2, 0.1), b = difference_moment(T, 0.2, 0.1, 0.1);
    EXPECT_NEAR(a, b, 1e-12 * a);
    const double d0 = -std::expm1(-1.0) + std::expm1(-2.0);
    EXPECT_GT(a, d0 * d0);
    EXPECT_LT(difference_moment(T, 0.1, 0.1001, 0.1), difference_moment(T, 0.1, 0.11, 0.1));
}

// ----- colored -----

TEST(ChaosColored, LevelZeroIsProduct) {
    const auto& T = colored_riesz();
    const int nn = T.nz() * T.nt();
    for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b) {
            const double ua = -std::expm1(-T.grid.z_nodes[a / T.nt()] / T.grid.t_nodes[a % T.nt()]);
            const double ub = -std::expm1(-T.grid.z_nodes[b / T.nt()] / T.grid.t_nodes[b % T.nt()]);
            EXPECT_DOUBLE_EQ(T.G(0, a, b), ua * ub);
        }
}

TEST(ChaosColored, DiagonalSymmetricNonnegative) {
    const auto& T = colored_riesz();
    const int nn = T.nz() * T.nt();
    for (int n = 0; n <= T.n_levels(); ++n)
        for (int a = 0; a < nn; ++a) {
            EXPECT_DOUBLE_EQ(T.M(n, a / T.nt(), a % T.nt()), T.G(n, a, a));
            EXPECT_GE(T.G(n, a, a), 0);
            for (int b = 0; b < nn; ++b) EXPECT_NEAR(T.G(n, a, b), T.G(n, b, a), 1e-12 * (1 + std::abs(T.G(n, a, b))));
        }
}

TEST(ChaosColored, FirstLevelBound) {
    const auto& T = colored_riesz();
    for (double eps : {0.05, 0.25, 1.0})
        for (double z : T.grid.z_nodes)
            for (double t : T.grid.t_nodes) {
                const auto c = colored_constants(T.model, t, eps);
                const auto [i, j] = T.node(z, t);
                EXPECT_LE(T.M(1, i, j), c.gamma_t * (0.5 * c.F_eps + c.f_eps * t));
            }
}

TEST(ChaosColored, TreeBound) {
    const auto& T = colored_riesz();
    for (double z : T.grid.z_nodes)
        for (double t : T.grid.t_nodes) {
            const auto c = colored_constants(T.model, t, T.eps);
            const auto [i, j] = T.node(z, t);
            for (int n = 1; n <= T.n_levels(); ++n) EXPECT_LE(T.M(n, i, j), tree_bound(n, z, t, c));
        }
}

// Cell averaging is a Jensen-type lower estimate for white kernels; refining the
// lattice moves level 1 toward the white engine.
TEST(ChaosColored, WhiteKernelsApproachWhiteEngine) {
    ChaosConfig c;
    c.n_levels = 1;
    c.grid = noise::FieldGrid::uniform(1, 4, 0.25, 4);
    const ChaosTable w = chaos_white(c);
    const noise::NoiseModel white{noise::CovKernel::white(), noise::CovKernel::white(), 0.0};
    c.engine.colored_refine = 1;
    const ChaosTable c1 = chaos_colored(c, white);
    c.engine.colored_refine = 2;
    const ChaosTable c2 = chaos_colored(c, white);
    for (int i = 0; i < w.nz(); ++i)
        for (int j = 0; j < w.nt(); ++j) {
            EXPECT_LE(c1.M(1, i, j), c2.M(1, i, j));
            EXPECT_LE(c2.M(1, i, j), w.M(1, i, j) * (1 + 1e-9));
        }
}

TEST(ChaosColored, Errors) {
    ChaosConfig c;
    c.grid = noise::FieldGrid::uniform(1, 9, 0.2, 4);
    EXPECT_THROW(chaos_colored(c, riesz_model()), DomainError);
    c.grid = noise::FieldGrid::uniform(1, 4, 0.2, 4);
    c.n_levels = 9;
    EXPECT_THROW(chaos_colored(c, riesz_model()), DomainError);
}

TEST(ChaosColored, RatioThresholdSmall) {
    ChaosTable T = colored_riesz();
    T.beta = 0.5;
    // Gamma_t (F + f) C_ab t^{1/2} with Gamma_t = 4 sqrt t, F + f = 4 at eps = 1/4
    const double q = colored_ratio_q(T.model, 0.01, 0.25, 0.5);
    EXPECT_NEAR(q, 16 * C_alpha_beta(0.5) * 0.01, 1e-12);
    EXPECT_EQ(ratio_threshold(T), 0.0);
}

// ----- ledger -----

TEST(ChaosLedger, AllWhiteRowsHold) {
    const auto L = build_ledger(white0());
    EXPECT_TRUE(L.all_hold(1e-3));
    bool geo = false, sum2 = false;
    for (const auto& r : L.rows) {
        geo = geo || r.bound_name == "geometric_2^-n";
        sum2 = sum2 || r.bound_name == "sum_le_2";
    }
    EXPECT_TRUE(geo && sum2);
    EXPECT_EQ(L.constants.size(), fitted_constants().size());
}

TEST(ChaosLedger, ColoredRowsHold) {
    const auto L = build_ledger(colored_riesz());
    EXPECT_TRUE(L.all_hold(1e-3));
}

TEST(ChaosLedger, NegativeMarginKept) {
    LedgerRow r{1, 1, 1, 0.6, "geometric_2^-n", 0.5};
    EXPECT_DOUBLE_EQ(r.margin(), -0.1);
    EXPECT_FALSE(r.holds(1e-3));
}

TEST(ChaosLedger, CsvFormat) {
    std::ostringstream os;
    write_csv(os, build_ledger(white0()));
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "n,z,t,value,bound_name,bound_value,margin");
    const std::regex num(R"(-?\d+(\.\d+)?(e[+-]\d+)?|-?inf|nan)");
    int rows = 0;
    while (std::getline(is, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        ASSERT_EQ(f.size(), 7u) << line;
        for (int k : {1, 2, 3, 5, 6}) {
            EXPECT_TRUE(std::regex_match(f[k], num)) << f[k];
            std::string mant = f[k].substr(0, f[k].find('e'));
            mant.erase(std::remove_if(mant.begin(), mant.end(), [](char ch) { return !std::isdigit(ch); }), mant.end());
            mant.erase(0, std::min(mant.find_first_not_of('0'), mant.size()));
            EXPECT_LE(mant.size(), 12u) << f[k];
        }
        ++rows;
    }
    EXPECT_GT(rows, 100);

    std::ostringstream ts;
    write_csv(ts, white0());
    EXPECT_EQ(ts.str().rfind("n,z,t,value,bound_name,bound_value,margin\n0,", 0), 0u);
}
