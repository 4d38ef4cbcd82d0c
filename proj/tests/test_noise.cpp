#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "kimura/noise.hpp"

using namespace kimura;
using namespace kimura::noise;

namespace {
double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// int_{a0}^{a1} int_{b0}^{b1} f(x - y) by nested tanh-sinh, splitting at the diagonal.
double brute_pair(const CovKernel& k, double a0, double a1, double b0, double b1) {
    boost::math::quadrature::tanh_sinh<double> ts;
    auto inner = [&](double x) {
        auto g = [&](double y) { return x == y ? 0.0 : k(x - y); };
        double s = 0;
        if (x > b0 && x < b1) s = ts.integrate(g, b0, x) + ts.integrate(g, x, b1);
        else s = ts.integrate(g, b0, b1);
        return s;
    };
    return ts.integrate(inner, a0, a1);
}

// Empirical covariance check of a sample: every pair of cells against the target at 5 SE.
template <class Target>
int count_outliers(const NoiseSample& s, Target target) {
    const int m = s.nz * s.nt;
    std::vector<double> mean(m, 0.0);
    for (int p = 0; p < s.n_paths; ++p)
        for (int a = 0; a < m; ++a) mean[a] += s.data[static_cast<std::size_t>(p) * m + a];
    for (double& v : mean) v /= s.n_paths;
    int bad = 0;
    for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b) {
            double c = 0;
            for (int p = 0; p < s.n_paths; ++p)
                c += (s.data[static_cast<std::size_t>(p) * m + a] - mean[a]) * (s.data[static_cast<std::size_t>(p) * m + b] - mean[b]);
            c /= s.n_paths - 1;
            const double caa = target(a / s.nt, a % s.nt, a / s.nt, a % s.nt);
            const double cbb = target(b / s.nt, b % s.nt, b / s.nt, b % s.nt);
            const double cab = target(a / s.nt, a % s.nt, b / s.nt, b % s.nt);
            const double se = std::sqrt((caa * cbb + cab * cab) / s.n_paths);
            if (std::abs(c - cab) > 5 * se) ++bad;
        }
    return bad;
}
}  // namespace

TEST(FEps, TrivialValues) {
    EXPECT_NEAR(f_eps(CovKernel::riesz(0.5), 0.25), 2.0, 1e-15);
    EXPECT_NEAR(f_eps(CovKernel::exponential(1), 1), 2 * (1 - std::exp(-1.0)), 1e-15);
    const CovKernel r = CovKernel::riesz(0.5);
    EXPECT_LT(f_eps(r, 1e-4), f_eps(r, 1e-2));
    EXPECT_LT(f_eps(r, 1e-2), f_eps(r, 1));
    EXPECT_THROW(f_eps(CovKernel::white(), 1), DomainError);
    EXPECT_THROW(f_eps(r, 0), DomainError);
    EXPECT_THROW(f_eps(CovKernel::riesz(1.0), 1), DomainError);
}

TEST(FEps, ClosedFormsMatchQuadrature) {
    boost::math::quadrature::tanh_sinh<double> ts;
    for (double h : {0.2, 0.5, 0.8}) {
        const CovKernel k = CovKernel::riesz(h);
        for (double eps : {1e-3, 0.25, 1.0, 7.0}) {
            const double q = 2 * ts.integrate([&](double x) { return k(x); }, 0.0, eps);
            EXPECT_LT(rel(f_eps(k, eps), q), 1e-8) << h << " " << eps;
        }
    }
    EXPECT_NEAR(f_eps(CovKernel::riesz(0.5), 0.09), 4 * std::sqrt(0.09), 1e-14);
    const CovKernel e = CovKernel::exponential(0.7);
    EXPECT_LT(rel(f_eps(e, 1.3), 2 * ts.integrate([&](double x) { return e(x); }, 0.0, 1.3)), 1e-12);
    // tabulated table of the exponential kernel: trapezoid-level agreement
    std::vector<double> x, f;
    for (int i = 0; i <= 2000; ++i) x.push_back(i * 0.005), f.push_back(std::exp(-i * 0.005 / 0.7));
    EXPECT_LT(rel(f_eps(CovKernel::tabulated(x, f), 1.3), f_eps(e, 1.3)), 1e-5);
}

TEST(GammaT, TrivialValuesAndMonotone) {
    EXPECT_NEAR(gamma_t(CovKernel::riesz(0.5), 1), 4.0, 1e-15);
    EXPECT_NEAR(gamma_t(CovKernel::exponential(2), 0.5), 2 * 2 * (1 - std::exp(-0.25)), 1e-15);
    for (const CovKernel& k : {CovKernel::riesz(0.5), CovKernel::exponential(2.0),
                               CovKernel::tabulated({0, 1, 2}, {2, 1, 0.5})}) {
        double prev = 0;
        for (double t : {0.1, 0.5, 1.0, 3.0}) {
            const double g = gamma_t(k, t);
            EXPECT_GE(g, prev);
            prev = g;
        }
    }
}

TEST(Kernel, CellPairIntegralMatchesBruteForce) {
    const std::vector<CovKernel> ks = {CovKernel::riesz(0.5), CovKernel::riesz(0.3), CovKernel::exponential(0.4),
                                       CovKernel::tabulated({0, 0.3, 1.0}, {1.0, 0.6, 0.1}),
                                       CovKernel::tabulated({-1.0, -0.2, 0.0, 0.5, 1.0}, {0.1, 0.7, 1.0, 0.6, 0.1})};
    const std::vector<std::array<double, 4>> cells = {
        {0, 0.25, 0, 0.25}, {0, 0.25, 0.25, 0.5}, {0.1, 0.3, 0.7, 1.1}, {0.5, 1.0, 0.2, 0.6}, {0.0, 0.1, 0.05, 0.4}};
    for (const auto& k : ks)
        for (const auto& c : cells) {
            const double a = cell_pair_integral(k, c[0], c[1], c[2], c[3]);
            // tanh-sinh loses a digit on the kinks of tabulated kernels
            const double tol = k.kind == Kind::tabulated ? 1e-6 : 1e-7;
            EXPECT_LT(rel(a, brute_pair(k, c[0], c[1], c[2], c[3])), tol) << kind_name(k.kind) << " " << c[0] << " " << c[2];
        }
    EXPECT_DOUBLE_EQ(cell_pair_integral(CovKernel::white(), 0, 1, 0.5, 2), 0.5);
    EXPECT_DOUBLE_EQ(cell_pair_integral(CovKernel::white(), 0, 1, 1, 2), 0.0);
}

TEST(Conditions, Flags) {
    for (const CovKernel& k : {CovKernel::riesz(0.5), CovKernel::exponential(1.0)}) {
        const ConditionReport r = check_conditions(k);
        EXPECT_TRUE(r.applicable && r.symmetric && r.nonneg && r.non_increasing && r.f_eps_vanishes);
    }
    const ConditionReport inc = check_conditions(CovKernel::tabulated({0, 1, 2}, {0.2, 0.5, 1.0}));
    EXPECT_FALSE(inc.non_increasing);
    EXPECT_TRUE(inc.symmetric);
    const ConditionReport asym = check_conditions(CovKernel::tabulated({-1, 0, 1}, {0.2, 1.0, 0.5}));
    EXPECT_FALSE(asym.symmetric);
    const ConditionReport neg = check_conditions(CovKernel::tabulated({0, 1}, {1.0, -0.5}));
    EXPECT_FALSE(neg.nonneg);
    EXPECT_FALSE(check_conditions(CovKernel::white()).applicable);
}

TEST(Grid, Validation) {
    const FieldGrid g = FieldGrid::uniform(4, 64, 0.5, 64);
    EXPECT_DOUBLE_EQ(g.z_nodes.back(), 4.0);
    EXPECT_DOUBLE_EQ(g.z_edges().front(), 0.0);
    FieldGrid bad = g;
    bad.z_nodes[3] += 0.01;
    EXPECT_THROW(bad.validate(), DomainError);
    EXPECT_THROW(FieldGrid::uniform(1, 0, 1, 1), DomainError);
    EXPECT_THROW((NoiseModel{CovKernel::white(), CovKernel::white(), -1}.validate()), DomainError);
}

TEST(Sampling, WhiteCovariance) {
    const FieldGrid g = FieldGrid::uniform(1, 4, 0.5, 4);
    const NoiseSample s = sample_field({}, g, 42, 100000);
    const double v = g.dz * g.dt;
    EXPECT_EQ(count_outliers(s, [&](int i, int j, int k, int l) { return i == k && j == l ? v : 0.0; }), 0);
}

TEST(Sampling, ColoredKroneckerCovariance) {
    const FieldGrid g = FieldGrid::uniform(1, 4, 0.5, 4);
    const NoiseModel m{CovKernel::riesz(0.5), CovKernel::riesz(0.5), 0.0};
    const NoiseSample s = sample_field(m, g, 7, 100000);
    const Eigen::MatrixXd cf = cell_covariance(m.spatial, g.z_edges()), cg = cell_covariance(m.temporal, g.t_edges());
    EXPECT_EQ(count_outliers(s, [&](int i, int j, int k, int l) { return cf(i, k) * cg(j, l); }), 0);
    // mixed: exponential in space, white in time
    const NoiseModel mx{CovKernel::exponential(0.3), CovKernel::white(), 0.0};
    const NoiseSample sx = sample_field(mx, g, 8, 100000);
    const Eigen::MatrixXd ce = cell_covariance(mx.spatial, g.z_edges());
    EXPECT_EQ(count_outliers(sx, [&](int i, int j, int k, int l) { return j == l ? ce(i, k) * g.dt : 0.0; }), 0);
}

TEST(Sampling, SeedDeterminism) {
    const FieldGrid g = FieldGrid::uniform(1, 8, 1, 8);
    const NoiseModel m{CovKernel::exponential(0.5), CovKernel::riesz(0.5), 0.5};
    const NoiseSample a = sample_field(m, g, 123, 50), b = sample_field(m, g, 123, 50), c = sample_field(m, g, 124, 50);
    EXPECT_EQ(a.data, b.data);
    EXPECT_NE(a.data, c.data);
    // a path does not depend on how many paths were requested
    const NoiseSample d = sample_field(m, g, 123, 3);
    EXPECT_TRUE(std::equal(d.data.begin(), d.data.end(), a.data.begin()));
}

TEST(Sampling, FactorizationFailure) {
    Eigen::MatrixXd c(2, 2);
    c << 1, 2, 2, 1;
    EXPECT_THROW(factor(c, "test"), NumericError);
    Eigen::MatrixXd s(2, 2);
    s << 1, 1, 1, 1;  // singular PSD: rescued by jitter
    EXPECT_NO_THROW(factor(s, "test"));
}
