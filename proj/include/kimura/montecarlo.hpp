#pragma once

// Monte Carlo for the mild solution
//   u(t+dt) = P_dt u(t) + P_{theta dt}(zhat^beta u(t) dW)
// on cells uniform in v = sqrt(z), with moment, ratio and Hoelder estimators.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kimura/chaos.hpp"
#include "kimura/errors.hpp"
#include "kimura/kernel.hpp"
#include "kimura/noise.hpp"
#include "kimura/quadrature.hpp"

namespace kimura::mc {

// Zero of the Hurwitz zeta function zeta(1/2, theta). Injecting each step's noise at lag
// theta * dt makes sum_k (k + theta)^{-1/2} match int s^{-1/2} ds with no O(1) remainder,
// which removes the leading time-step bias of the white-noise variance.
inline constexpr double hurwitz_theta = 0.302721828598366;

struct SimScheme {
    noise::FieldGrid grid;  // output nodes
    int n_paths = 1000;
    std::uint64_t seed = 1;
    double beta = 0.0;
    int substeps = 4;       // internal steps per output dt
    double dv = 1.0 / 64;   // internal cell width in sqrt(z)
    double v_extend = 5.0;  // internal domain reaches sqrt(z_max) + v_extend sqrt(t_max)
    double theta = hurwitz_theta;  // noise injection lag in units of the internal step; 1 = plain Euler
    bool zero_noise = false;
    bool store_paths = false;
    int threads = 0;
    // Pairs (z1, z2) whose squared increments are accumulated at time pair_t.
    std::vector<std::pair<double, double>> pairs;
    double pair_t = 0;

    void validate() const {
        grid.validate();
        if (n_paths < 100) throw DomainError("SimScheme.n_paths must be >= 100");
        if (!(beta >= 0) || !std::isfinite(beta)) throw DomainError("SimScheme.beta must be finite and >= 0");
        if (substeps < 1) throw DomainError("SimScheme.substeps must be >= 1");
        if (grid.dt / substeps > grid.t_nodes.front() / 4 * (1 + 1e-12))
            throw DomainError("SimScheme: internal time step must be <= min t_node / 4");
        if (!(dv > 0) || !(v_extend >= 0)) throw DomainError("SimScheme: dv must be > 0, v_extend >= 0");
        if (!(theta > 0 && theta <= 1)) throw DomainError("SimScheme.theta must lie in (0, 1]");
        if (threads < 0) throw DomainError("SimScheme.threads must be >= 0");
        if (!pairs.empty()) {
            bool on = false;
            for (double t : grid.t_nodes) on = on || std::abs(t - pair_t) <= 1e-9 * grid.dt;
            if (!on) throw DomainError("SimScheme.pair_t must be an output time node");
            for (auto [a, b] : pairs)
                if (!(a > 0) || !(b > 0)) throw DomainError("SimScheme.pairs must have positive entries");
        }
    }
};

// Power sums of u over paths; the estimators below only need these.
inline constexpr std::array<int, 6> kPowers = {1, 2, 4, 6, 8, 12};

struct Ensemble {
    noise::FieldGrid grid;
    int n_paths = 0;
    double beta = 0;
    std::array<std::vector<double>, kPowers.size()> sums;  // [k][i * nt + j]
    std::vector<std::pair<double, double>> pairs;
    double pair_t = 0;
    std::vector<double> pair_s2, pair_s4;  // sums of (du)^2 and (du)^4
    // Optional full paths: [(p * (nz + 1) + i) * (nt + 1) + j], i = 0 is z = 0, j = 0 is t = 0.
    std::vector<double> paths;

    int nz() const { return static_cast<int>(grid.z_nodes.size()); }
    int nt() const { return static_cast<int>(grid.t_nodes.size()); }
    bool has_paths() const { return !paths.empty(); }
    double path(int p, int i, int j) const {
        return paths[(static_cast<std::size_t>(p) * (nz() + 1) + i) * (nt() + 1) + j];
    }
};

namespace detail {

// Rows of cell-integrated q0 in banded form: row r covers columns [first, first + vals.size()).
struct Banded {
    std::vector<int> first;
    std::vector<std::vector<double>> vals;

    double row_dot(int r, const double* x) const {
        const auto& v = vals[r];
        const double* xx = x + first[r];
        double s = 0;
        for (std::size_t k = 0; k < v.size(); ++k) s += v[k] * xx[k];
        return s;
    }
};

// Row z, column cell [v_j, v_{j+1}]: int q0(z, w, s) dw, w = v^2.
inline Banded kernel_rows(const std::vector<double>& zs, int ncell, double dv, double s) {
    const quad::Rule& r = quad::gauss_legendre(6);
    const int nsub = 6;
    const double reach = 8 * std::sqrt(s);
    Banded B;
    for (double z : zs) {
        const double a = std::sqrt(z);
        const int j0 = std::max(0, static_cast<int>(std::floor((a - reach) / dv)));
        const int j1 = std::min(ncell - 1, static_cast<int>(std::ceil((a + reach) / dv)));
        std::vector<double> row;
        for (int j = j0; j <= j1; ++j) {
            double acc = 0;
            for (int k = 0; k < nsub; ++k) {
                const double v0 = (j + static_cast<double>(k) / nsub) * dv, h = 0.5 * dv / nsub, c = v0 + h;
                for (std::size_t q = 0; q < r.x.size(); ++q) {
                    const double v = c + h * r.x[q];
                    acc += h * r.w[q] * 2 * v * kernel::detail::q_any(0.0, z, v * v, s);
                }
            }
            row.push_back(acc);
        }
        B.first.push_back(j0);
        B.vals.push_back(std::move(row));
    }
    return B;
}

// Internal cells uniform in v = sqrt(z), centers zc, degenerate weights at the centers.
struct Cells {
    int nc = 0;
    double h = 0;
    std::vector<double> zc, area, weight, z_edges;
    explicit Cells(const SimScheme& sc) {
        const double vmax = std::sqrt(sc.grid.z_nodes.back()) + sc.v_extend * std::sqrt(sc.grid.t_nodes.back());
        nc = static_cast<int>(std::ceil(vmax / sc.dv));
        h = sc.grid.dt / sc.substeps;
        zc.resize(nc), area.resize(nc), weight.resize(nc), z_edges.resize(nc + 1);
        for (int j = 0; j < nc; ++j) {
            const double v = (j + 0.5) * sc.dv;
            zc[j] = v * v;
            area[j] = std::pow((j + 1) * sc.dv, 2) - std::pow(j * sc.dv, 2);
            weight[j] = sc.beta > 0 ? std::pow(std::min(zc[j], 1.0), sc.beta) : 1.0;
        }
        for (int j = 0; j <= nc; ++j) z_edges[j] = std::pow(j * sc.dv, 2);
    }
};

inline Eigen::MatrixXd dense(const Banded& B, int ncol) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<int>(B.first.size()), ncol);
    for (std::size_t r = 0; r < B.first.size(); ++r)
        for (std::size_t k = 0; k < B.vals[r].size(); ++k) M(r, B.first[r] + k) = B.vals[r][k];
    return M;
}

inline bool on_node(double x, const std::vector<double>& nodes, double d, int& idx) {
    for (std::size_t k = 0; k < nodes.size(); ++k)
        if (std::abs(nodes[k] - x) <= 1e-9 * d) {
            idx = static_cast<int>(k);
            return true;
        }
    return false;
}

}  // namespace detail

// Ito-type mild Euler scheme. Each path draws from its own stream derived from (seed, path).
inline Ensemble simulate(const SimScheme& sc, const noise::NoiseModel& model,
                         const std::function<double(double)>& u_init = [](double) { return 1.0; }) {
    sc.validate();
    model.validate();
    const int nz = static_cast<int>(sc.grid.z_nodes.size()), nt = static_cast<int>(sc.grid.t_nodes.size());
    const detail::Cells cl(sc);
    const int S = sc.substeps, nsteps = nt * S, nc = cl.nc;
    const double h = cl.h;
    const std::vector<double>&zc = cl.zc, &area = cl.area, &weight = cl.weight, &z_edges = cl.z_edges;

    const detail::Banded P = detail::kernel_rows(zc, nc, sc.dv, h);
    const detail::Banded Pn = detail::kernel_rows(zc, nc, sc.dv, sc.theta * h);
    // output rows: grid z nodes, then pair points
    std::vector<double> zo = sc.grid.z_nodes;
    std::vector<int> pair_idx;
    for (auto [a, b] : sc.pairs) {
        for (double z : {a, b}) {
            int k = -1;
            if (!detail::on_node(z, zo, sc.grid.dz, k)) {
                k = static_cast<int>(zo.size());
                zo.push_back(z);
            }
            pair_idx.push_back(k);
        }
    }
    const int no = static_cast<int>(zo.size());
    const detail::Banded Po = detail::kernel_rows(zo, nc, sc.dv, h);
    const detail::Banded Pon = detail::kernel_rows(zo, nc, sc.dv, sc.theta * h);
    int pair_j = -1;
    if (!sc.pairs.empty()) detail::on_node(sc.pair_t, sc.grid.t_nodes, sc.grid.dt, pair_j);

    const bool white_t = model.temporal.is_white(), white_x = model.spatial.is_white();
    std::unique_ptr<noise::FieldSampler> sampler;
    if (!sc.zero_noise && !(white_t && white_x)) {
        std::vector<double> t_edges(nsteps + 1);
        for (int k = 0; k <= nsteps; ++k) t_edges[k] = k * h;
        sampler = std::make_unique<noise::FieldSampler>(model, z_edges, t_edges);
    }

    Ensemble E;
    E.grid = sc.grid;
    E.n_paths = sc.n_paths;
    E.beta = sc.beta;
    E.pairs = sc.pairs;
    E.pair_t = sc.pair_t;
    for (auto& s : E.sums) s.assign(static_cast<std::size_t>(nz) * nt, 0.0);
    E.pair_s2.assign(sc.pairs.size(), 0.0);
    E.pair_s4.assign(sc.pairs.size(), 0.0);
    if (sc.store_paths) E.paths.assign(static_cast<std::size_t>(sc.n_paths) * (nz + 1) * (nt + 1), 0.0);

    // Fixed blocks of paths, combined in block order: results do not depend on the thread count.
    const int block = 64, nblocks = (sc.n_paths + block - 1) / block;
    struct Acc {
        std::array<std::vector<double>, kPowers.size()> sums;
        std::vector<double> s2, s4;
    };
    std::vector<Acc> accs(nblocks);

    chaos::detail::parallel_for(nblocks, sc.threads, [&](int b) {
        Acc& A = accs[b];
        for (auto& s : A.sums) s.assign(static_cast<std::size_t>(nz) * nt, 0.0);
        A.s2.assign(sc.pairs.size(), 0.0);
        A.s4.assign(sc.pairs.size(), 0.0);
        std::vector<double> u(nc), un(nc), xi(nc), out(no), field;
        std::normal_distribution<double> nd(0.0, 1.0);
        for (int p = b * block; p < std::min(sc.n_paths, (b + 1) * block); ++p) {
            auto gen = noise::path_stream(sc.seed, static_cast<std::uint64_t>(p));
            if (sampler) sampler->sample(gen, field);
            for (int j = 0; j < nc; ++j) u[j] = u_init(zc[j]);
            if (sc.store_paths)
                for (int i = 1; i <= nz; ++i)
                    E.paths[(static_cast<std::size_t>(p) * (nz + 1) + i) * (nt + 1)] = u_init(sc.grid.z_nodes[i - 1]);
            for (int k = 0; k < nsteps; ++k) {
                if (sc.zero_noise) {
                    std::fill(xi.begin(), xi.end(), 0.0);
                } else if (!sampler) {
                    for (int j = 0; j < nc; ++j) xi[j] = weight[j] * u[j] * nd(gen) * std::sqrt(h / area[j]);
                } else {
                    for (int j = 0; j < nc; ++j)
                        xi[j] = weight[j] * u[j] * field[static_cast<std::size_t>(j) * nsteps + k] / area[j];
                }
                if ((k + 1) % S == 0) {
                    const int jt = (k + 1) / S - 1;
                    for (int o = 0; o < no; ++o) out[o] = Po.row_dot(o, u.data()) + Pon.row_dot(o, xi.data());
                    for (int i = 0; i < nz; ++i) {
                        const double x = out[i];
                        if (!std::isfinite(x)) {
                            std::ostringstream os;
                            os << "simulate: non-finite value at path " << p << ", z=" << sc.grid.z_nodes[i]
                               << ", t=" << sc.grid.t_nodes[jt];
                            throw NumericError(os.str());
                        }
                        const std::size_t idx = static_cast<std::size_t>(i) * nt + jt;
                        const double x2 = x * x, x4 = x2 * x2, x6 = x4 * x2;
                        A.sums[0][idx] += x;
                        A.sums[1][idx] += x2;
                        A.sums[2][idx] += x4;
                        A.sums[3][idx] += x6;
                        A.sums[4][idx] += x4 * x4;
                        A.sums[5][idx] += x6 * x6;
                        if (sc.store_paths)
                            E.paths[(static_cast<std::size_t>(p) * (nz + 1) + i + 1) * (nt + 1) + jt + 1] = x;
                    }
                    if (jt == pair_j)
                        for (std::size_t q = 0; q < sc.pairs.size(); ++q) {
                            const double d = out[pair_idx[2 * q]] - out[pair_idx[2 * q + 1]], d2 = d * d;
                            A.s2[q] += d2;
                            A.s4[q] += d2 * d2;
                        }
                }
                for (int j = 0; j < nc; ++j) un[j] = P.row_dot(j, u.data()) + Pn.row_dot(j, xi.data());
                u.swap(un);
            }
        }
    });
    for (const Acc& A : accs) {
        for (std::size_t k = 0; k < kPowers.size(); ++k)
            for (std::size_t i = 0; i < A.sums[k].size(); ++i) E.sums[k][i] += A.sums[k][i];
        for (std::size_t q = 0; q < sc.pairs.size(); ++q) {
            E.pair_s2[q] += A.s2[q];
            E.pair_s4[q] += A.s4[q];
        }
    }
    return E;
}

// Exact E[u^2] of the white-noise scheme at the output nodes, [i * nt + j]: the
// second-moment matrix obeys S' = P S P^T + P_theta diag(w^2 diag(S) h / area) P_theta^T.
// Separates the scheme's discretization bias from sampling error. Dense in the cell count.
inline std::vector<double> scheme_second_moment(const SimScheme& sc,
                                                const std::function<double(double)>& u_init = [](double) { return 1.0; }) {
    sc.validate();
    const detail::Cells cl(sc);
    const int nz = static_cast<int>(sc.grid.z_nodes.size()), nt = static_cast<int>(sc.grid.t_nodes.size());
    const Eigen::MatrixXd P = detail::dense(detail::kernel_rows(cl.zc, cl.nc, sc.dv, cl.h), cl.nc);
    const Eigen::MatrixXd Pn = detail::dense(detail::kernel_rows(cl.zc, cl.nc, sc.dv, sc.theta * cl.h), cl.nc);
    const Eigen::MatrixXd Po = detail::dense(detail::kernel_rows(sc.grid.z_nodes, cl.nc, sc.dv, cl.h), cl.nc);
    const Eigen::MatrixXd Pon = detail::dense(detail::kernel_rows(sc.grid.z_nodes, cl.nc, sc.dv, sc.theta * cl.h), cl.nc);
    Eigen::VectorXd u(cl.nc);
    for (int j = 0; j < cl.nc; ++j) u(j) = u_init(cl.zc[j]);
    Eigen::MatrixXd Sm = u * u.transpose();
    std::vector<double> out(static_cast<std::size_t>(nz) * nt);
    Eigen::VectorXd d(cl.nc);
    for (int k = 0; k < nt * sc.substeps; ++k) {
        for (int j = 0; j < cl.nc; ++j)
            d(j) = sc.zero_noise ? 0.0 : cl.weight[j] * cl.weight[j] * Sm(j, j) * cl.h / cl.area[j];
        if ((k + 1) % sc.substeps == 0) {
            const int jt = (k + 1) / sc.substeps - 1;
            const Eigen::MatrixXd O = Po * Sm * Po.transpose() + Pon * d.asDiagonal() * Pon.transpose();
            for (int i = 0; i < nz; ++i) out[static_cast<std::size_t>(i) * nt + jt] = O(i, i);
        }
        Sm = P * Sm * P.transpose() + Pn * d.asDiagonal() * Pn.transpose();
    }
    return out;
}

// ----- estimators --------------------------------------------------------------------------

// Mean and jackknife standard error of a per-path statistic from its first two power sums.
// For a sample mean the delete-one jackknife variance is exactly s^2 / n.
struct Estimate {
    double value = 0, se = 0;
};
inline Estimate mean_se(double s1, double s2, int n) {
    const double m = s1 / n;
    double ss = s2 - n * m * m;
    // below the cancellation floor of the power-sum form the sample is constant
    if (ss <= 16 * std::numeric_limits<double>::epsilon() * std::abs(s2)) ss = 0;
    const double var = ss / (n - 1);
    return {m, std::sqrt(var / n)};
}

struct MomentRow {
    double z = 0, t = 0, u0 = 0;
    Estimate mean, m2, m4, m6, ratio;
};

struct MomentReport {
    int n_paths = 0;
    noise::FieldGrid grid;
    std::vector<int> p_list;
    std::vector<MomentRow> rows;  // [i * nt + j]
};

inline MomentReport estimate_moments(const Ensemble& E, const std::vector<int>& p_list = {2, 4, 6}) {
    for (int p : p_list)
        if (p != 2 && p != 4 && p != 6) throw DomainError("estimate_moments: p must be one of 2, 4, 6");
    MomentReport R;
    R.n_paths = E.n_paths;
    R.grid = E.grid;
    R.p_list = p_list;
    const int nz = E.nz(), nt = E.nt(), n = E.n_paths;
    auto has = [&](int p) { return std::find(p_list.begin(), p_list.end(), p) != p_list.end(); };
    for (int i = 0; i < nz; ++i)
        for (int j = 0; j < nt; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * nt + j;
            MomentRow r;
            r.z = E.grid.z_nodes[i];
            r.t = E.grid.t_nodes[j];
            r.u0 = kernel::mass_q0(r.z, r.t);
            r.mean = mean_se(E.sums[0][k], E.sums[1][k], n);
            r.m2 = mean_se(E.sums[1][k], E.sums[2][k], n);
            if (has(4)) r.m4 = mean_se(E.sums[2][k], E.sums[4][k], n);
            if (has(6)) r.m6 = mean_se(E.sums[3][k], E.sums[5][k], n);
            r.ratio = {r.m2.value / (r.u0 * r.u0), r.m2.se / (r.u0 * r.u0)};
            R.rows.push_back(r);
        }
    return R;
}

struct HolderFit {
    double slope = 0, intercept = 0;
    double slope_se = 0;
    double ci_lo = 0, ci_hi = 0;  // 95% interval for the slope
    int n_pairs = 0;
    std::vector<double> log_dz, log_m, log_se;  // per pair: log|dz|, log E|du|^2, SE of the latter
};

// Weighted least squares of log E|du|^2 on log|dz|; weights from the SE of each log mean.
inline HolderFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& se) {
    HolderFit f;
    const int n = static_cast<int>(x.size());
    if (n < 4) throw DomainError("estimate_holder: fewer than 4 usable pairs");
    double sw = 0, sx = 0, sy = 0;
    std::vector<double> w(n);
    const double floor_se = 1e-6;
    for (int i = 0; i < n; ++i) {
        w[i] = 1 / std::pow(std::max(se[i], floor_se), 2);
        sw += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += w[i] * (x[i] - mx) * (x[i] - mx);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double chi2 = 0;
    for (int i = 0; i < n; ++i) chi2 += w[i] * std::pow(y[i] - f.intercept - f.slope * x[i], 2);
    // scale by the reduced chi^2 when the model misfits beyond the sampling noise
    const double scale = std::max(1.0, chi2 / (n - 2));
    f.slope_se = std::sqrt(scale / sxx);
    f.ci_lo = f.slope - 1.96 * f.slope_se;
    f.ci_hi = f.slope + 1.96 * f.slope_se;
    f.n_pairs = n;
    f.log_dz = x;
    f.log_m = y;
    f.log_se = se;
    return f;
}

inline HolderFit estimate_holder(const Ensemble& E, double t, const std::vector<std::pair<double, double>>& pair_list) {
    std::vector<double> x, y, se;
    const int n = E.n_paths;
    for (auto [a, b] : pair_list) {
        if (a == b) continue;
        Estimate m;
        bool found = false;
        if (std::abs(t - E.pair_t) <= 1e-9 * E.grid.dt)
            for (std::size_t q = 0; q < E.pairs.size(); ++q)
                if (E.pairs[q].first == a && E.pairs[q].second == b) {
                    m = mean_se(E.pair_s2[q], E.pair_s4[q], n);
                    found = true;
                }
        if (!found && E.has_paths()) {
            int i1, i2, j;
            auto zi = [&](double z, int& i) {
                if (z == 0) {
                    i = 0;
                    return true;
                }
                if (!detail::on_node(z, E.grid.z_nodes, E.grid.dz, i)) return false;
                ++i;
                return true;
            };
            if (zi(a, i1) && zi(b, i2) && detail::on_node(t, E.grid.t_nodes, E.grid.dt, j)) {
                double s2 = 0, s4 = 0;
                for (int p = 0; p < n; ++p) {
                    const double d = E.path(p, i1, j + 1) - E.path(p, i2, j + 1), d2 = d * d;
                    s2 += d2;
                    s4 += d2 * d2;
                }
                m = mean_se(s2, s4, n);
                found = true;
            }
        }
        if (!found || !(m.value > 0)) continue;
        x.push_back(std::log(std::abs(a - b)));
        y.push_back(std::log(m.value));
        se.push_back(m.se / m.value);
    }
    return fit_loglog(x, y, se);
}

// Dyadic pairs (2^{-k}, 2^{-k+1}) for k = k_lo..k_hi.
inline std::vector<std::pair<double, double>> dyadic_pairs(int k_lo, int k_hi) {
    std::vector<std::pair<double, double>> v;
    for (int k = k_lo; k <= k_hi; ++k) v.push_back({std::ldexp(1.0, -k), std::ldexp(1.0, -k + 1)});
    return v;
}

// ----- reconciliation ---------------------------------------------------------------------------

struct ReconRow {
    double z = 0, t = 0;
    double mc = 0, se = 0, chaos = 0, tail = 0;
    double dev_se = 0;  // |mc - chaos| / se
    bool flag = false;  // |mc - chaos| > gate se + tail
    double margin(double gate) const { return gate * se + tail - std::abs(mc - chaos); }
};

struct Reconciliation {
    double gate = 3;
    int n_levels = 0;
    std::vector<ReconRow> rows;
    double fraction_within() const {
        if (rows.empty()) return 0;
        std::size_t ok = 0;
        for (const auto& r : rows) ok += !r.flag;
        return static_cast<double>(ok) / rows.size();
    }
};

inline Reconciliation compare_chaos_mc(const MomentReport& R, const chaos::ChaosTable& tab, double gate = 3) {
    Reconciliation out;
    out.gate = gate;
    out.n_levels = tab.n_levels();
    for (const auto& r : R.rows) {
        std::pair<int, int> ij;
        try {
            ij = tab.node(r.z, r.t);
        } catch (const DomainError&) {
            continue;
        }
        (void)ij;
        const chaos::SecondMoment sm = chaos::second_moment(tab, r.z, r.t);
        ReconRow x;
        x.z = r.z;
        x.t = r.t;
        x.mc = r.m2.value;
        x.se = r.m2.se;
        x.chaos = sm.value;
        x.tail = sm.tail_bound;
        const double d = std::abs(x.mc - x.chaos);
        x.dev_se = x.se > 0 ? d / x.se : (d > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        x.flag = d > gate * x.se + x.tail;
        out.rows.push_back(x);
    }
    return out;
}

// ----- serialization -----------------------------------------------------------------------------

// Columns n, z, t, value, bound_name, bound_value, margin; here n is the moment order
// (1 for the mean), bound_name "se" and bound_value the standard error.
inline void write_csv(std::ostream& os, const MomentReport& R, bool header = true) {
    if (header) chaos::write_header(os);
    auto row = [&](int n, double z, double t, const Estimate& e, const char* name) {
        os << n << ',';
        chaos::detail::write_num(os, z);
        os << ',';
        chaos::detail::write_num(os, t);
        os << ',';
        chaos::detail::write_num(os, e.value);
        os << ',' << name << ',';
        chaos::detail::write_num(os, e.se);
        os << ",nan\n";
    };
    auto has = [&](int p) { return std::find(R.p_list.begin(), R.p_list.end(), p) != R.p_list.end(); };
    for (const auto& r : R.rows) {
        row(1, r.z, r.t, r.mean, "se");
        row(2, r.z, r.t, r.m2, "se");
        if (has(4)) row(4, r.z, r.t, r.m4, "se");
        if (has(6)) row(6, r.z, r.t, r.m6, "se");
        row(2, r.z, r.t, r.ratio, "ratio_se");
    }
}

// value = MC second moment, bound_value = chaos value, margin = gate SE + tail - |MC - chaos|.
inline void write_csv(std::ostream& os, const Reconciliation& rec, bool header = true) {
    if (header) chaos::write_header(os);
    for (const auto& r : rec.rows) {
        os << rec.n_levels << ',';
        chaos::detail::write_num(os, r.z);
        os << ',';
        chaos::detail::write_num(os, r.t);
        os << ',';
        chaos::detail::write_num(os, r.mc);
        os << ",chaos,";
        chaos::detail::write_num(os, r.chaos);
        os << ',';
        chaos::detail::write_num(os, r.margin(rec.gate));
        os << '\n';
    }
}

// Binary dump: "KSPD", u16 version, u64 n_paths, u64 N_z, u64 N_t, then n_paths * N_z * N_t
// little-endian f64 (N_z and N_t include the z = 0 row and the t = 0 column).
inline constexpr std::uint16_t kspd_version = 1;

namespace detail {
template <class T>
void put_le(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>)
        std::memcpy(&bits, &v, sizeof(T));
    else
        bits = static_cast<std::uint64_t>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}
template <class T>
T get_le(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw NumericError("KSPD: truncated stream");
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    if constexpr (std::is_floating_point_v<T>) {
        T v;
        std::memcpy(&v, &bits, sizeof(T));
        return v;
    } else {
        return static_cast<T>(bits);
    }
}
}  // namespace detail

inline void write_kspd(std::ostream& os, const Ensemble& E) {
    if (!E.has_paths()) throw DomainError("write_kspd: ensemble was simulated without store_paths");
    os.write("KSPD", 4);
    detail::put_le<std::uint16_t>(os, kspd_version);
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(E.n_paths));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(E.nz() + 1));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(E.nt() + 1));
    for (double v : E.paths) detail::put_le<double>(os, v);
}

struct KspdData {
    std::uint64_t n_paths = 0, n_z = 0, n_t = 0;
    std::vector<double> data;
};

inline KspdData read_kspd(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "KSPD", 4) != 0) throw NumericError("KSPD: bad magic");
    if (detail::get_le<std::uint16_t>(is) != kspd_version) throw NumericError("KSPD: unsupported version");
    KspdData d;
    d.n_paths = detail::get_le<std::uint64_t>(is);
    d.n_z = detail::get_le<std::uint64_t>(is);
    d.n_t = detail::get_le<std::uint64_t>(is);
    if (d.n_z == 0 || d.n_t == 0 || d.n_paths > (std::uint64_t(1) << 40) / (d.n_z * d.n_t))
        throw NumericError("KSPD: implausible dimensions");
    d.data.resize(d.n_paths * d.n_z * d.n_t);
    for (double& v : d.data) v = detail::get_le<double>(is);
    return d;
}

}  // namespace kimura::mc
