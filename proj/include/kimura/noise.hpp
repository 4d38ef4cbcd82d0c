#pragma once

// Covariance kernels f (space) and gamma (time), their local integrals, and
// seeded sampling of cell-integrated Gaussian noise with separable covariance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "kimura/errors.hpp"

namespace kimura::noise {

enum class Kind { dirac_white, riesz, exponential, tabulated };

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::dirac_white: return "dirac-white";
        case Kind::riesz: return "riesz";
        case Kind::exponential: return "exponential";
        case Kind::tabulated: return "tabulated";
    }
    return "?";
}

// riesz: f(x) = |x|^{-h}; exponential: f(x) = exp(-|x| / ell);
// tabulated: piecewise-linear through (x_i, f_i), zero outside the samples.
// If all sample nodes are >= 0 the table is read at |x|.
struct CovKernel {
    Kind kind = Kind::dirac_white;
    double h = 0.5;
    double ell = 1.0;
    std::vector<double> tab_x, tab_f;

    static CovKernel white() { return {}; }
    static CovKernel riesz(double h) { return {Kind::riesz, h, 1.0, {}, {}}; }
    static CovKernel exponential(double ell) { return {Kind::exponential, 0.5, ell, {}, {}}; }
    static CovKernel tabulated(std::vector<double> x, std::vector<double> f) {
        return {Kind::tabulated, 0.5, 1.0, std::move(x), std::move(f)};
    }

    bool is_white() const { return kind == Kind::dirac_white; }
    bool half_table() const { return !tab_x.empty() && tab_x.front() >= 0.0; }

    void validate() const {
        switch (kind) {
            case Kind::dirac_white: return;
            case Kind::riesz:
                if (!(h > 0 && h < 1)) throw DomainError("CovKernel riesz: exponent h must lie in (0, 1)");
                return;
            case Kind::exponential:
                if (!(ell > 0) || !std::isfinite(ell)) throw DomainError("CovKernel exponential: scale must be > 0");
                return;
            case Kind::tabulated:
                if (tab_x.size() < 2 || tab_x.size() != tab_f.size())
                    throw DomainError("CovKernel tabulated: need >= 2 matching samples");
                for (std::size_t i = 0; i < tab_x.size(); ++i) {
                    if (!std::isfinite(tab_x[i]) || !std::isfinite(tab_f[i]))
                        throw DomainError("CovKernel tabulated: samples must be finite");
                    if (i > 0 && !(tab_x[i] > tab_x[i - 1]))
                        throw DomainError("CovKernel tabulated: nodes must increase");
                }
                return;
        }
    }

    double operator()(double x) const {
        switch (kind) {
            case Kind::dirac_white: throw DomainError("CovKernel: dirac-white has no pointwise value");
            case Kind::riesz: return std::pow(std::abs(x), -h);
            case Kind::exponential: return std::exp(-std::abs(x) / ell);
            case Kind::tabulated: {
                const double y = half_table() ? std::abs(x) : x;
                if (y < tab_x.front() || y > tab_x.back()) return 0.0;
                const auto it = std::upper_bound(tab_x.begin(), tab_x.end(), y);
                if (it == tab_x.end()) return tab_f.back();
                const std::size_t i = static_cast<std::size_t>(it - tab_x.begin()) - 1;
                const double a = (y - tab_x[i]) / (tab_x[i + 1] - tab_x[i]);
                return (1 - a) * tab_f[i] + a * tab_f[i + 1];
            }
        }
        return 0.0;
    }
};

namespace detail {

// For a linear segment (x0, f0)-(x1, f1) restricted to [lo, hi]: int f and int (u - y) f(y) dy.
// Simpson is exact for these quadratics.
inline double seg_integral(double x0, double f0, double x1, double f1, double lo, double hi, double u, bool moment) {
    lo = std::max(lo, x0), hi = std::min(hi, x1);
    if (!(hi > lo)) return 0.0;
    auto f = [&](double y) {
        const double v = f0 + (f1 - f0) * (y - x0) / (x1 - x0);
        return moment ? (u - y) * v : v;
    };
    return (hi - lo) / 6 * (f(lo) + 4 * f(0.5 * (lo + hi)) + f(hi));
}

// int_a^b f for the tabulated kernel (a <= b), reading the table at x (full table).
inline double tab_integral_full(const CovKernel& k, double a, double b) {
    double s = 0;
    for (std::size_t i = 0; i + 1 < k.tab_x.size(); ++i)
        s += seg_integral(k.tab_x[i], k.tab_f[i], k.tab_x[i + 1], k.tab_f[i + 1], a, b, 0, false);
    return s;
}

}  // namespace detail

// F_eps = int_{-eps}^{eps} f
inline double f_eps(const CovKernel& k, double eps) {
    k.validate();
    if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("f_eps: eps must be positive and finite");
    double v = 0;
    switch (k.kind) {
        case Kind::dirac_white: throw DomainError("f_eps: not defined for dirac-white");
        case Kind::riesz: v = 2 * std::pow(eps, 1 - k.h) / (1 - k.h); break;
        case Kind::exponential: v = 2 * k.ell * -std::expm1(-eps / k.ell); break;
        case Kind::tabulated:
            v = k.half_table() ? 2 * detail::tab_integral_full(k, 0, eps) : detail::tab_integral_full(k, -eps, eps);
            break;
    }
    if (!std::isfinite(v)) throw DomainError("f_eps: local integral diverges");
    return v;
}

// Gamma_t = int_{-t}^{t} gamma; same computation as f_eps.
inline double gamma_t(const CovKernel& k, double t) {
    if (k.is_white()) throw DomainError("gamma_t: not defined for dirac-white");
    return f_eps(k, t);
}

// G(u) = int_0^{|u|} (|u| - y) f(y) dy for a symmetric kernel: G'' = f, G(0) = G'(0) = 0.
inline double second_antiderivative(const CovKernel& k, double u) {
    const double a = std::abs(u);
    switch (k.kind) {
        case Kind::dirac_white: return 0.5 * a;  // G'' = delta
        case Kind::riesz: return std::pow(a, 2 - k.h) / ((1 - k.h) * (2 - k.h));
        case Kind::exponential: return k.ell * a + k.ell * k.ell * std::expm1(-a / k.ell);
        case Kind::tabulated: {
            if (!k.half_table()) throw DomainError("second_antiderivative: tabulated kernel must be given on x >= 0");
            double s = 0;
            for (std::size_t i = 0; i + 1 < k.tab_x.size(); ++i)
                s += detail::seg_integral(k.tab_x[i], k.tab_f[i], k.tab_x[i + 1], k.tab_f[i + 1], 0, a, a, true);
            return s;
        }
    }
    return 0;
}

// int_{a0}^{a1} int_{b0}^{b1} f(x - y) dy dx; for dirac-white this is the overlap length.
inline double cell_pair_integral(const CovKernel& k, double a0, double a1, double b0, double b1) {
    if (k.is_white()) return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
    if (k.kind == Kind::tabulated && !k.half_table()) {
        // general table: 1D reduction over the lag with the triangle weight
        const double d1 = a1 - a0, d2 = b1 - b0, c = a0 - b0;
        auto weight = [&](double r) {  // measure of {(x,y): x - y = r} in the cell pair
            const double lo = std::max(0.0, r - c), hi = std::min(d1, r - c + d2);
            return std::max(0.0, hi - lo);
        };
        const double rlo = c - d2, rhi = c + d1;
        std::vector<double> br{rlo, c, c + d1 - d2, rhi};
        for (double x : k.tab_x) br.push_back(x);
        std::erase_if(br, [&](double x) { return x < rlo || x > rhi; });
        std::sort(br.begin(), br.end());
        double s = 0;
        for (std::size_t i = 0; i + 1 < br.size(); ++i) {
            const double lo = br[i], hi = br[i + 1], m = 0.5 * (lo + hi);
            // integrand piecewise quadratic: Simpson exact
            s += (hi - lo) / 6 * (weight(lo) * k(lo) + 4 * weight(m) * k(m) + weight(hi) * k(hi));
        }
        return s;
    }
    auto G = [&](double u) { return second_antiderivative(k, u); };
    return G(a1 - b0) - G(a0 - b0) - G(a1 - b1) + G(a0 - b1);
}

struct ConditionReport {
    bool applicable = true;  // false for dirac-white
    bool symmetric = false;
    bool nonneg = false;
    bool non_increasing = false;
    bool f_eps_vanishes = false;
};

// Kernel conditions the colored-noise bounds assume, checked on a dense sample grid.
inline ConditionReport check_conditions(const CovKernel& k) {
    ConditionReport r;
    if (k.is_white()) {
        r.applicable = false;
        return r;
    }
    k.validate();
    double xmax = 10.0;
    if (k.kind == Kind::exponential) xmax = 20 * k.ell;
    if (k.kind == Kind::tabulated) xmax = std::max(std::abs(k.tab_x.front()), std::abs(k.tab_x.back()));
    std::vector<double> xs;
    for (int i = 1; i <= 4000; ++i) xs.push_back(xmax * i / 4000.0);
    for (double lx = -8; lx < std::log10(xs.front()); lx += 0.05) xs.push_back(std::pow(10.0, lx));
    if (k.kind == Kind::tabulated)
        for (double x : k.tab_x)
            if (x > 0) xs.push_back(x);
    std::sort(xs.begin(), xs.end());

    r.symmetric = r.nonneg = r.non_increasing = true;
    double prev = INFINITY;
    for (double x : xs) {
        const double a = k(x), b = k(-x);
        if (std::abs(a - b) > 1e-12 * (1 + std::abs(a))) r.symmetric = false;
        if (a < 0 || b < 0) r.nonneg = false;
        if (a > prev * (1 + 1e-12) + 1e-300) r.non_increasing = false;
        prev = a;
    }
    if (k.kind == Kind::tabulated && k.tab_x.front() <= 0 && k(0) < 0) r.nonneg = false;

    // F_eps along eps = 10^{-1..-8}: strictly decreasing and ending below 1e-6 (1 + F_1)
    double last = f_eps(k, 1.0), f1 = last;
    bool dec = true;
    for (int e = 1; e <= 8; ++e) {
        const double v = f_eps(k, std::pow(10.0, -e));
        dec = dec && v < last;
        last = v;
    }
    r.f_eps_vanishes = k.kind == Kind::riesz ? true : dec && last < 1e-6 * (1 + f1);
    return r;
}

struct NoiseModel {
    CovKernel spatial;   // f
    CovKernel temporal;  // gamma
    double beta = 0.0;

    bool white() const { return spatial.is_white() && temporal.is_white(); }
    void validate() const {
        if (!(beta >= 0) || !std::isfinite(beta)) throw DomainError("NoiseModel.beta must be finite and >= 0");
        spatial.validate();
        temporal.validate();
    }
};

// Uniform nodes z_i = i dz (i = 1..nz), t_j = j dt (j = 1..nt); node i closes cell (z_{i-1}, z_i].
struct FieldGrid {
    std::vector<double> z_nodes, t_nodes;
    double dz = 0, dt = 0;

    static FieldGrid uniform(double z_max, int nz, double t_max, int nt) {
        FieldGrid g;
        if (nz < 1 || nt < 1) throw DomainError("FieldGrid: need at least one node per axis");
        g.dz = z_max / nz;
        g.dt = t_max / nt;
        for (int i = 1; i <= nz; ++i) g.z_nodes.push_back(g.dz * i);
        for (int j = 1; j <= nt; ++j) g.t_nodes.push_back(g.dt * j);
        g.validate();
        return g;
    }

    void validate() const {
        auto check = [](const std::vector<double>& v, double d, const char* name) {
            if (v.empty() || !(d > 0)) throw DomainError(std::string("FieldGrid: empty axis or bad spacing on ") + name);
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!(v[i] > 0) || !std::isfinite(v[i])) throw DomainError(std::string("FieldGrid: nodes must be positive on ") + name);
                if (i > 0 && !(v[i] > v[i - 1])) throw DomainError(std::string("FieldGrid: nodes must increase on ") + name);
                const double prev = i == 0 ? v[0] - d : v[i - 1];
                if (std::abs(v[i] - prev - d) > 1e-9 * d) throw DomainError(std::string("FieldGrid: spacing not uniform on ") + name);
            }
        };
        check(z_nodes, dz, "z");
        check(t_nodes, dt, "t");
    }

    std::vector<double> z_edges() const {
        std::vector<double> e{z_nodes.front() - dz};
        e.insert(e.end(), z_nodes.begin(), z_nodes.end());
        return e;
    }
    std::vector<double> t_edges() const {
        std::vector<double> e{t_nodes.front() - dt};
        e.insert(e.end(), t_nodes.begin(), t_nodes.end());
        return e;
    }
};

// Cell-integrated covariance matrix C[i][k] = int_{cell i} int_{cell k} f(x - y).
inline Eigen::MatrixXd cell_covariance(const CovKernel& k, const std::vector<double>& edges) {
    const Eigen::Index n = static_cast<Eigen::Index>(edges.size()) - 1;
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            c(i, j) = c(j, i) = cell_pair_integral(k, edges[i], edges[i + 1], edges[j], edges[j + 1]);
    return c;
}

// Lower Cholesky factor; retries with jitter 1e-12, 1e-10, 1e-8 times the mean diagonal.
inline Eigen::MatrixXd factor(const Eigen::MatrixXd& c, const char* what) {
    const double scale = c.diagonal().mean();
    for (double jitter : {0.0, 1e-12, 1e-10, 1e-8}) {
        Eigen::MatrixXd m = c;
        m.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericError(std::string("noise: covariance factorization failed for ") + what);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent generator stream for one path.
inline std::mt19937_64 path_stream(std::uint64_t seed, std::uint64_t path) {
    return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL)));
}

// Reusable sampler for a fixed (model, cell edges) pair: dW = L_f Z L_gamma^T.
class FieldSampler {
  public:
    FieldSampler(const NoiseModel& model, std::vector<double> z_edges, std::vector<double> t_edges)
        : nz_(static_cast<int>(z_edges.size()) - 1), nt_(static_cast<int>(t_edges.size()) - 1) {
        model.validate();
        if (nz_ < 1 || nt_ < 1) throw DomainError("FieldSampler: need at least one cell per axis");
        white_z_ = model.spatial.is_white();
        white_t_ = model.temporal.is_white();
        if (white_z_) {
            sz_.resize(nz_);
            for (int i = 0; i < nz_; ++i) sz_[i] = std::sqrt(z_edges[i + 1] - z_edges[i]);
        } else {
            lz_ = factor(cell_covariance(model.spatial, z_edges), "spatial kernel");
        }
        if (white_t_) {
            st_.resize(nt_);
            for (int j = 0; j < nt_; ++j) st_[j] = std::sqrt(t_edges[j + 1] - t_edges[j]);
        } else {
            lt_ = factor(cell_covariance(model.temporal, t_edges), "temporal kernel");
        }
    }

    int nz() const { return nz_; }
    int nt() const { return nt_; }

    // out[i * nt + j] = dW over cell (i, j)
    void sample(std::mt19937_64& gen, std::vector<double>& out) const {
        std::normal_distribution<double> normal(0.0, 1.0);
        Eigen::MatrixXd z(nz_, nt_);
        for (int i = 0; i < nz_; ++i)
            for (int j = 0; j < nt_; ++j) z(i, j) = normal(gen);
        if (white_z_) z = sz_.asDiagonal() * z;
        else z = lz_.triangularView<Eigen::Lower>() * z;
        if (white_t_) z = z * st_.asDiagonal();
        else z = z * lt_.transpose().triangularView<Eigen::Upper>();
        out.resize(static_cast<std::size_t>(nz_) * nt_);
        for (int i = 0; i < nz_; ++i)
            for (int j = 0; j < nt_; ++j) out[static_cast<std::size_t>(i) * nt_ + j] = z(i, j);
    }

  private:
    int nz_, nt_;
    bool white_z_ = true, white_t_ = true;
    Eigen::VectorXd sz_, st_;
    Eigen::MatrixXd lz_, lt_;
};

struct NoiseSample {
    int n_paths = 0, nz = 0, nt = 0;
    std::vector<double> data;  // [path][i][j]
    double at(int p, int i, int j) const {
        return data[(static_cast<std::size_t>(p) * nz + i) * nt + j];
    }
};

inline NoiseSample sample_field(const NoiseModel& model, const FieldGrid& grid, std::uint64_t seed, int n_paths) {
    grid.validate();
    if (n_paths < 1) throw DomainError("sample_field: n_paths must be >= 1");
    const FieldSampler s(model, grid.z_edges(), grid.t_edges());
    NoiseSample out{n_paths, s.nz(), s.nt(), {}};
    out.data.reserve(static_cast<std::size_t>(n_paths) * s.nz() * s.nt());
    std::vector<double> buf;
    for (int p = 0; p < n_paths; ++p) {
        auto gen = path_stream(seed, static_cast<std::uint64_t>(p));
        s.sample(gen, buf);
        out.data.insert(out.data.end(), buf.begin(), buf.end());
    }
    return out;
}

}  // namespace kimura::noise
