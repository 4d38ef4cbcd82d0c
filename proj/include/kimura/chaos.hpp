#pragma once

// Wiener-chaos second moments of the stochastic Kimura equation
//   du = z u_zz dt + zhat^beta u dW,  u(z, 0) = 1,  zhat = min(z, 1),
// computed level by level, and the analytic bounds they are checked against.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kimura/constants.hpp"
#include "kimura/errors.hpp"
#include "kimura/kernel.hpp"
#include "kimura/noise.hpp"
#include "kimura/quadrature.hpp"
#include "kimura/specfun.hpp"

namespace kimura::chaos {

// Resolution of the recursion. The defaults were chosen by a refinement study
// (doubling every density moves M_n by < 4e-6 relative, see test_chaos).
struct EngineSpec {
    int x_per_decade = 24;  // internal table nodes in log(z/t)
    double log10_x_lo = -6, log10_x_hi = 6;
    int t_per_decade = 6;   // internal table nodes in log t (beta > 0 only)
    double t_decades = 6;
    int tau_points = 6;     // Gauss-Legendre points per tau panel
    int w_points = 8;       // Gauss-Legendre points per sqrt(w) panel
    double w_window = 6;    // half-width of the sqrt(w) window in units of sqrt(t - tau)
    int colored_refine = 2; // internal cells per output cell, per axis
    double colored_extend = 3;  // colored x-domain reaches (sqrt(z_max) + c sqrt(t_max))^2
    int threads = 0;        // 0: hardware concurrency

    void validate() const {
        if (x_per_decade < 2 || t_per_decade < 1) throw DomainError("EngineSpec: table density too low");
        if (!(log10_x_hi > log10_x_lo) || !(t_decades > 0)) throw DomainError("EngineSpec: empty table range");
        if (!(w_window >= 3)) throw DomainError("EngineSpec.w_window must be >= 3");
        if (colored_refine < 1 || colored_refine > 6) throw DomainError("EngineSpec.colored_refine must lie in [1, 6]");
        if (!(colored_extend >= 0)) throw DomainError("EngineSpec.colored_extend must be >= 0");
        if (threads < 0) throw DomainError("EngineSpec.threads must be >= 0");
        quad::gauss_legendre(tau_points);
        quad::gauss_legendre(w_points);
    }
};

struct ChaosConfig {
    int n_levels = 5;
    noise::FieldGrid grid;
    kernel::QuadratureSpec quad;
    double beta = 0.0;
    double eps = 0.25;
    EngineSpec engine;

    void validate(bool colored) const {
        if (n_levels < 1) throw DomainError("ChaosConfig.n_levels must be >= 1");
        if (colored && n_levels > 8) throw DomainError("ChaosConfig.n_levels must be <= 8 for colored noise");
        if (!colored && n_levels > 12) throw DomainError("ChaosConfig.n_levels must be <= 12 for white noise");
        if (!(beta >= 0) || !std::isfinite(beta)) throw DomainError("ChaosConfig.beta must be finite and >= 0");
        if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("ChaosConfig.eps must be > 0");
        grid.validate();
        if (colored && (grid.z_nodes.size() > 8 || grid.t_nodes.size() > 8))
            throw DomainError("ChaosConfig.grid: colored recursion allows at most 8 nodes per axis");
        quad.validate();
        engine.validate();
    }
};

namespace detail {

inline double hat(double w) { return w < 1.0 ? w : 1.0; }
inline double u0(double z, double t) { return -std::expm1(-z / t); }

template <class F>
void parallel_for(int n, int threads, F&& f) {
    int nt = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    nt = std::max(1, std::min(nt, n));
    if (nt == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int k = 0; k < nt; ++k)
        pool.emplace_back([&] {
            for (int i; !failed && (i = next++) < n;) {
                try {
                    f(i);
                } catch (...) {
                    if (!failed.exchange(true)) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

// log R_n = log(M_n / u0^2) on uniform nodes in (log x, log t), x = z/t.
// Cubic Lagrange in log x and log t. Outside the nodes: power law toward
// x -> 0, constant toward x -> inf, non-increasing power law toward t -> 0.
struct LogTable {
    double lx0 = 0, hx = 1, lt0 = 0, ht = 1;
    int nx = 0, nt = 0;
    std::vector<double> v;  // v[j * nx + i]

    double x_node(int i) const { return std::exp(lx0 + hx * i); }
    double t_node(int j) const { return std::exp(lt0 + ht * j); }

    // 4-point Lagrange on f(i0 .. i0 + 3) at fractional index u from i0
    template <class F>
    static double cubic(F&& f, int i0, double u) {
        const double l0 = -(u - 1) * (u - 2) * (u - 3) / 6, l1 = u * (u - 2) * (u - 3) / 2;
        const double l2 = -u * (u - 1) * (u - 3) / 2, l3 = u * (u - 1) * (u - 2) / 6;
        return l0 * f(i0) + l1 * f(i0 + 1) + l2 * f(i0 + 2) + l3 * f(i0 + 3);
    }

    double column(int j, double fx) const {
        const double* c = &v[static_cast<std::size_t>(j) * nx];
        if (fx <= 0) return c[0] + fx * (c[1] - c[0]);
        if (fx >= nx - 1) return c[nx - 1];  // far from the boundary R_n levels off
        if (nx < 4) {
            const int i = std::min(static_cast<int>(fx), nx - 2);
            const double a = fx - i;
            return (1 - a) * c[i] + a * c[i + 1];
        }
        const int i0 = std::clamp(static_cast<int>(fx) - 1, 0, nx - 4);
        return cubic([c](int i) { return c[i]; }, i0, fx - i0);
    }

    double log_ratio(double x, double t) const {
        const double fx = (std::log(x) - lx0) / hx;
        if (nt == 1) return column(0, fx);
        const double ft = (std::log(t) - lt0) / ht;
        if (ft < 0) {
            // below the table R_n may only shrink as t decreases (every n >= 1 level vanishes as t -> 0)
            const double c0 = column(0, fx), c1 = column(1, fx);
            return c0 + std::min(0.0, ft * (c1 - c0));
        }
        if (nt < 4) {
            const int j = std::min(static_cast<int>(ft), nt - 2);
            const double a = ft - j;
            return (1 - a) * column(j, fx) + a * column(j + 1, fx);
        }
        const int j0 = std::clamp(static_cast<int>(ft) - 1, 0, nt - 4);
        return cubic([&](int j) { return column(j, fx); }, j0, ft - j0);
    }
    double moment(double w, double tau) const {
        const double u = u0(w, tau);
        return u * u * std::exp(log_ratio(w / tau, tau));
    }
};

// Quadrature nodes for tau in (0, t): tau = sigma^2 on (0, t/2], s = t - tau = sigma^2
// on the other half; both halves use geometric sigma panels toward their endpoint.
// The upper half reaches down to sigma = sigma_fine.
inline quad::Nodes tau_nodes(double t, double sigma_fine, const EngineSpec& e) {
    const quad::Rule& r = quad::gauss_legendre(e.tau_points);
    const double smax = std::sqrt(0.5 * t);
    quad::Nodes out;
    auto half = [&](int depth, bool upper) {
        std::vector<double> br = quad::geometric_breaks(smax, depth, 0.5);
        for (std::size_t k = 0; k + 1 < br.size(); ++k) {
            const double a = br[k], b = br[k + 1], h = 0.5 * (b - a), c = 0.5 * (a + b);
            for (std::size_t i = 0; i < r.x.size(); ++i) {
                const double sg = c + h * r.x[i];
                out.x.push_back(upper ? t - sg * sg : sg * sg);
                out.w.push_back(h * r.w[i] * 2 * sg);
            }
        }
    };
    half(8, false);
    const int depth = std::clamp(static_cast<int>(std::ceil(std::log2(smax / sigma_fine))) + 3, 6, 48);
    half(depth, true);
    return out;
}

// Composite rule in v = sqrt(w) around kernel centers at time gap s; the
// returned weights include the Jacobian 2v.
inline void w_nodes(const std::vector<double>& centers, double s, double tau, bool kink, const EngineSpec& e,
                    std::vector<double>& br, quad::Nodes& out) {
    static constexpr double steps[] = {0.25, 0.5, 1.0, 1.5, 2.5, 4.0};
    const double rs = std::sqrt(s);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (double c : centers) {
        lo = std::min(lo, std::sqrt(c) - e.w_window * rs);
        hi = std::max(hi, std::sqrt(c) + e.w_window * rs);
    }
    lo = std::max(lo, 0.0);
    br.clear();
    br.push_back(lo);
    br.push_back(hi);
    auto add = [&](double v) {
        if (v > lo && v < hi) br.push_back(v);
    };
    for (double c : centers) {
        const double a = std::sqrt(c);
        add(a);
        for (double k : steps) {
            add(a - k * rs);
            add(a + k * rs);
        }
    }
    const double rt = std::sqrt(tau);
    add(0.5 * rt);
    add(rt);
    add(2 * rt);
    if (kink) add(1.0);
    std::sort(br.begin(), br.end());
    out.x.clear();
    out.w.clear();
    const quad::Rule& r = quad::gauss_legendre(e.w_points);
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        const double a = br[k], b = br[k + 1];
        if (!(b > a)) continue;
        const double h = 0.5 * (b - a), c = 0.5 * (a + b);
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            const double v = c + h * r.x[i];
            out.x.push_back(v * v);
            out.w.push_back(h * r.w[i] * 2 * v);
        }
    }
}

// int_0^t dtau inner(tau, s, w-nodes) where the w-nodes cover all kernel centers.
template <class Inner>
double tau_w_integral(const std::vector<double>& centers, double t, double sigma_fine, bool kink,
                      const EngineSpec& e, Inner&& inner) {
    const quad::Nodes tn = tau_nodes(t, sigma_fine, e);
    std::vector<double> br;
    quad::Nodes wn;
    double acc = 0;
    for (std::size_t k = 0; k < tn.x.size(); ++k) {
        const double tau = tn.x[k], s = t - tau;
        if (!(s > 0) || !(tau > 0)) continue;
        w_nodes(centers, s, tau, kink, e, br, wn);
        acc += tn.w[k] * inner(tau, s, wn);
    }
    return acc;
}

// int_0^t int_0^inf what^{2 beta} q0^2(z, w, t - tau) prev(w, tau) dw dtau
template <class Prev>
double level_integral(double z, double t, double beta, const EngineSpec& e, Prev&& prev) {
    const bool weighted = beta > 0;
    const double sf = 0.25 * std::sqrt(z);
    return tau_w_integral({z}, t, sf, weighted, e, [&](double tau, double s, const quad::Nodes& wn) {
        double acc = 0;
        for (std::size_t i = 0; i < wn.x.size(); ++i) {
            const double w = wn.x[i];
            if (!(w > 0)) continue;
            const double q = kernel::detail::q_any(0.0, z, w, s);
            double g = q * q * prev(w, tau);
            if (weighted) g *= std::pow(hat(w), 2 * beta);
            acc += wn.w[i] * g;
        }
        return acc;
    });
}

// Same with the kernel difference d0 = q0(z1, .) - q0(z2, .) in place of q0.
template <class Prev>
double difference_integral(double z1, double z2, double t, double beta, const EngineSpec& e, Prev&& prev) {
    const double dv = std::abs(std::sqrt(z1) - std::sqrt(z2));
    const double sf = 0.25 * std::min(std::sqrt(std::min(z1, z2)), dv > 0 ? dv : 1.0);
    return tau_w_integral({z1, z2}, t, sf, beta > 0, e, [&](double tau, double s, const quad::Nodes& wn) {
        double acc = 0;
        for (std::size_t i = 0; i < wn.x.size(); ++i) {
            const double w = wn.x[i];
            if (!(w > 0)) continue;
            const double d = kernel::detail::q_any(0.0, z1, w, s) - kernel::detail::q_any(0.0, z2, w, s);
            double g = d * d * prev(w, tau);
            if (beta > 0) g *= std::pow(hat(w), 2 * beta);
            acc += wn.w[i] * g;
        }
        return acc;
    });
}

inline void check_value(double v, int n, double z, double t, const char* who) {
    if (!std::isfinite(v) || v < 0) {
        std::ostringstream os;
        os << who << ": quadrature breakdown at level n=" << n << ", z=" << z << ", t=" << t;
        throw AccuracyError(os.str(), v);
    }
}

}  // namespace detail

struct ChaosTable {
    bool colored = false;
    double beta = 0;
    double eps = 0.25;
    noise::NoiseModel model;  // white kernels for chaos_white
    noise::FieldGrid grid;
    EngineSpec engine;
    // levels[n][i * nt + j] = M_n(z_i, t_j)
    std::vector<std::vector<double>> levels;
    // colored only: cross[n][a * nn + b] = G_n(node a, node b), a = i * nt + j
    std::vector<std::vector<double>> cross;
    // white only: internal ratio tables for levels 1..N-1 (index n - 1)
    std::vector<detail::LogTable> ratio_tables;

    int n_levels() const { return static_cast<int>(levels.size()) - 1; }
    int nz() const { return static_cast<int>(grid.z_nodes.size()); }
    int nt() const { return static_cast<int>(grid.t_nodes.size()); }
    double M(int n, int i, int j) const { return levels.at(n)[static_cast<std::size_t>(i) * nt() + j]; }
    double G(int n, int a, int b) const {
        const std::size_t nn = static_cast<std::size_t>(nz()) * nt();
        return cross.at(n)[a * nn + b];
    }

    // Node indices of (z, t); throws if (z, t) is not a grid node.
    std::pair<int, int> node(double z, double t) const {
        auto find = [](const std::vector<double>& v, double x, double d, const char* what) {
            for (std::size_t i = 0; i < v.size(); ++i)
                if (std::abs(v[i] - x) <= 1e-9 * d) return static_cast<int>(i);
            throw DomainError(std::string("ChaosTable: ") + what + " is not a grid node");
        };
        return {find(grid.z_nodes, z, grid.dz, "z"), find(grid.t_nodes, t, grid.dt, "t")};
    }
};

// ----- white and degenerate-white noise ------------------------------------------------

inline ChaosTable chaos_white(const ChaosConfig& cfg) {
    cfg.validate(false);
    const EngineSpec& e = cfg.engine;
    ChaosTable tab;
    tab.beta = cfg.beta;
    tab.eps = cfg.eps;
    tab.model = {noise::CovKernel::white(), noise::CovKernel::white(), cfg.beta};
    tab.grid = cfg.grid;
    tab.engine = e;
    const int nz = tab.nz(), nt = tab.nt(), N = cfg.n_levels;
    const double T = cfg.grid.t_nodes.back();

    std::vector<double> l0(static_cast<std::size_t>(nz) * nt);
    for (int i = 0; i < nz; ++i)
        for (int j = 0; j < nt; ++j) {
            const double u = detail::u0(cfg.grid.z_nodes[i], cfg.grid.t_nodes[j]);
            l0[i * nt + j] = u * u;
        }
    tab.levels.push_back(std::move(l0));

    // Internal table layout. For beta = 0 the moments depend on z/t only.
    detail::LogTable shape;
    shape.hx = std::log(10.0) / e.x_per_decade;
    shape.lx0 = e.log10_x_lo * std::log(10.0);
    shape.nx = static_cast<int>(std::lround((e.log10_x_hi - e.log10_x_lo) * e.x_per_decade)) + 1;
    if (cfg.beta > 0) {
        shape.ht = std::log(10.0) / e.t_per_decade;
        shape.nt = static_cast<int>(std::lround(e.t_decades * e.t_per_decade)) + 1;
        shape.lt0 = std::log(T) - shape.ht * (shape.nt - 1);
    } else {
        shape.nt = 1;
        shape.lt0 = 0;
    }

    for (int n = 1; n <= N; ++n) {
        const detail::LogTable* prev_tab = n >= 2 ? &tab.ratio_tables[n - 2] : nullptr;
        auto prev = [&](double w, double tau) {
            if (!prev_tab) {
                const double u = detail::u0(w, tau);
                return u * u;
            }
            return prev_tab->moment(w, tau);
        };
        std::vector<double> out(static_cast<std::size_t>(nz) * nt);
        detail::parallel_for(nz * nt, e.threads, [&](int k) {
            const double z = cfg.grid.z_nodes[k / nt], t = cfg.grid.t_nodes[k % nt];
            const double v = detail::level_integral(z, t, cfg.beta, e, prev);
            detail::check_value(v, n, z, t, "chaos_white");
            out[k] = v;
        });
        tab.levels.push_back(std::move(out));

        if (n == N) break;
        detail::LogTable next = shape;
        next.v.assign(static_cast<std::size_t>(next.nx) * next.nt, 0.0);
        detail::parallel_for(next.nx * next.nt, e.threads, [&](int k) {
            const int i = k % next.nx, j = k / next.nx;
            const double x = next.x_node(i), t = cfg.beta > 0 ? next.t_node(j) : 1.0, z = x * t;
            const double v = detail::level_integral(z, t, cfg.beta, e, prev);
            detail::check_value(v, n, z, t, "chaos_white");
            const double u = detail::u0(z, t);
            next.v[k] = std::log(std::max(v, 1e-300) / (u * u));
        });
        tab.ratio_tables.push_back(std::move(next));
    }
    return tab;
}

// ----- colored noise -------------------------------------------------------------------

namespace detail {

// B[i][a][m] = int_{x cell a} xhat^beta int_{m dt}^{(m+1) dt} q0(z_i, x, s) ds dx on a
// uniform internal grid; cumulative sweeps in x per s-node.
inline std::vector<double> colored_kernel_masses(const std::vector<double>& z_out, int nx, double dx, int nt,
                                                 double dt, double beta, const EngineSpec& e) {
    const int nzo = static_cast<int>(z_out.size());
    std::vector<double> B(static_cast<std::size_t>(nzo) * nx * nt, 0.0);
    const quad::Rule& rs = quad::gauss_legendre(e.tau_points);
    const quad::Rule& rw = quad::gauss_legendre(e.w_points);
    parallel_for(nzo, e.threads, [&](int i) {
        const double z = z_out[i];
        std::vector<double> cum(nx + 1), br;
        for (int m = 0; m < nt; ++m) {
            // sigma = sqrt(s) panels on [sqrt(m dt), sqrt((m+1) dt)], geometric toward 0 for m = 0
            std::vector<double> sb;
            const double a = std::sqrt(m * dt), b = std::sqrt((m + 1) * dt);
            if (m == 0) {
                sb = quad::geometric_breaks(b, std::clamp(static_cast<int>(std::ceil(std::log2(b / (1e-3 * std::min(std::sqrt(z), b))))), 4, 40), 0.5);
            } else {
                sb = {a, 0.5 * (a + b), b};
            }
            for (std::size_t p = 0; p + 1 < sb.size(); ++p) {
                const double h = 0.5 * (sb[p + 1] - sb[p]), c = 0.5 * (sb[p + 1] + sb[p]);
                for (std::size_t q = 0; q < rs.x.size(); ++q) {
                    const double sg = c + h * rs.x[q], s = sg * sg, ws = h * rs.w[q] * 2 * sg;
                    // cumulative x-integral over edges k dx, k = 0..nx
                    const double rz = std::sqrt(z), r = std::sqrt(s);
                    const double vlo = std::max(0.0, rz - e.w_window * r), vhi = rz + e.w_window * r;
                    br.clear();
                    for (int k = 0; k <= nx; ++k) {
                        const double v = std::sqrt(k * dx);
                        if (v > vlo && v < vhi) br.push_back(v);
                    }
                    br.push_back(vlo);
                    br.push_back(std::min(vhi, std::sqrt(nx * dx)));
                    for (double st : {0.25, 0.5, 1.0, 2.0, 3.5}) {
                        if (rz - st * r > vlo) br.push_back(rz - st * r);
                        if (rz + st * r < vhi) br.push_back(rz + st * r);
                    }
                    br.push_back(rz);
                    if (beta > 0) br.push_back(1.0);
                    std::sort(br.begin(), br.end());
                    br.erase(std::unique(br.begin(), br.end()), br.end());
                    // integrate panel by panel, dropping each panel's mass into its x cell
                    for (std::size_t pp = 0; pp + 1 < br.size(); ++pp) {
                        const double v0 = br[pp], v1 = br[pp + 1];
                        if (!(v1 > v0) || v1 * v1 > nx * dx * (1 + 1e-12)) continue;
                        const int cell = std::min(static_cast<int>((0.5 * (v0 + v1)) * (0.5 * (v0 + v1)) / dx), nx - 1);
                        const double hh = 0.5 * (v1 - v0), cc = 0.5 * (v1 + v0);
                        double acc = 0;
                        for (std::size_t qq = 0; qq < rw.x.size(); ++qq) {
                            const double v = cc + hh * rw.x[qq], w = v * v;
                            if (!(w > 0)) continue;
                            double g = kernel::detail::q_any(0.0, z, w, s) * 2 * v;
                            if (beta > 0) g *= std::pow(hat(w), beta);
                            acc += rw.w[qq] * g;
                        }
                        B[(static_cast<std::size_t>(i) * nx + cell) * nt + m] += ws * hh * acc;
                    }
                }
            }
        }
    });
    return B;
}

}  // namespace detail

// Colored recursion on a refined uniform cell grid:
//   G_n(p, q) = sum_{c1, c2} A[p, c1] A[q, c2] Kbar[c1, c2] Gbar_{n-1}[c1, c2]
// A = kernel mass of node p in cell c, Kbar = exact cell-pair average of f(x-y) gamma(r-s),
// Gbar = average of G_{n-1} over the corners of both cells.
inline ChaosTable chaos_colored(const ChaosConfig& cfg, const noise::NoiseModel& model) {
    cfg.validate(true);
    model.validate();
    for (const auto* k : {&model.spatial, &model.temporal}) {
        if (k->is_white()) continue;
        const auto rep = noise::check_conditions(*k);
        if (!rep.symmetric || !rep.nonneg) throw DomainError("chaos_colored: covariance must be symmetric and non-negative");
    }
    const EngineSpec& e = cfg.engine;
    ChaosTable tab;
    tab.colored = true;
    tab.beta = cfg.beta;
    tab.eps = cfg.eps;
    tab.model = model;
    tab.model.beta = cfg.beta;
    tab.grid = cfg.grid;
    tab.engine = e;

    const int r = e.colored_refine;
    const double dx = cfg.grid.dz / r, dt = cfg.grid.dt / r;
    const double zmax = cfg.grid.z_nodes.back(), T = cfg.grid.t_nodes.back();
    // output nodes must sit on the internal lattice
    for (double z : cfg.grid.z_nodes)
        if (std::abs(z / dx - std::round(z / dx)) > 1e-6) throw DomainError("chaos_colored: z nodes must be multiples of dz");
    for (double t : cfg.grid.t_nodes)
        if (std::abs(t / dt - std::round(t / dt)) > 1e-6) throw DomainError("chaos_colored: t nodes must be multiples of dt");
    const double xext = std::pow(std::sqrt(zmax) + e.colored_extend * std::sqrt(T), 2);
    const int nx = static_cast<int>(std::ceil(xext / dx - 1e-9));
    const int ntc = static_cast<int>(std::lround(T / dt));
    const int nc = nx * ntc;  // cells, index c = ax * ntc + at
    const int nfull = (nx + 1) * (ntc + 1);  // lattice nodes incl. z = 0 and t = 0
    auto full = [&](int ix, int it) { return ix * (ntc + 1) + it; };

    // interior nodes (ix >= 1, it >= 1) with index p = (ix - 1) * ntc + (it - 1)
    std::vector<double> xs(nx);
    for (int k = 0; k < nx; ++k) xs[k] = (k + 1) * dx;
    const std::vector<double> B = detail::colored_kernel_masses(xs, nx, dx, ntc, dt, cfg.beta, e);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nc, nc);
    for (int ix = 1; ix <= nx; ++ix)
        for (int it = 1; it <= ntc; ++it) {
            const int p = (ix - 1) * ntc + (it - 1);
            for (int ax = 0; ax < nx; ++ax)
                for (int at = 0; at < it; ++at)
                    A(p, ax * ntc + at) = B[(static_cast<std::size_t>(ix - 1) * nx + ax) * ntc + (it - 1 - at)];
        }

    // cell-pair covariance averages
    auto cell_avg = [](const noise::CovKernel& k, int n, double d) {
        Eigen::MatrixXd m(n, n);
        if (k.is_white()) {
            m.setIdentity();
            return Eigen::MatrixXd(m / d);
        }
        std::vector<double> edges(n + 1);
        for (int i = 0; i <= n; ++i) edges[i] = i * d;
        return Eigen::MatrixXd(noise::cell_covariance(k, edges) / (d * d));
    };
    const Eigen::MatrixXd Kx = cell_avg(model.spatial, nx, dx), Kt = cell_avg(model.temporal, ntc, dt);
    Eigen::MatrixXd K(nc, nc);
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) K(a, b) = Kx(a / ntc, b / ntc) * Kt(a % ntc, b % ntc);

    // corner averaging operator, cells x lattice nodes
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(nc, nfull);
    for (int ax = 0; ax < nx; ++ax)
        for (int at = 0; at < ntc; ++at) {
            const int c = ax * ntc + at;
            P(c, full(ax, at)) += 0.25;
            P(c, full(ax + 1, at)) += 0.25;
            P(c, full(ax, at + 1)) += 0.25;
            P(c, full(ax + 1, at + 1)) += 0.25;
        }

    // output node -> interior index
    const int nzo = tab.nz(), nto = tab.nt(), no = nzo * nto;
    std::vector<int> out_idx(no);
    for (int i = 0; i < nzo; ++i)
        for (int j = 0; j < nto; ++j) {
            const int ix = static_cast<int>(std::lround(cfg.grid.z_nodes[i] / dx));
            const int it = static_cast<int>(std::lround(cfg.grid.t_nodes[j] / dt));
            out_idx[i * nto + j] = (ix - 1) * ntc + (it - 1);
        }
    auto store = [&](const Eigen::MatrixXd& Gint) {
        std::vector<double> diag(no), cr(static_cast<std::size_t>(no) * no);
        for (int a = 0; a < no; ++a) {
            diag[a] = Gint(out_idx[a], out_idx[a]);
            for (int b = 0; b < no; ++b) cr[static_cast<std::size_t>(a) * no + b] = Gint(out_idx[a], out_idx[b]);
        }
        tab.levels.push_back(std::move(diag));
        tab.cross.push_back(std::move(cr));
    };

    // level 0 on the full lattice; u0(z, 0) = 1 for z > 0, u0(0, t) = 0
    Eigen::VectorXd u(nfull);
    for (int ix = 0; ix <= nx; ++ix)
        for (int it = 0; it <= ntc; ++it)
            u(full(ix, it)) = ix == 0 ? 0.0 : (it == 0 ? 1.0 : detail::u0(ix * dx, it * dt));
    Eigen::MatrixXd Gfull = u * u.transpose();
    {
        Eigen::VectorXd ui(nc);
        for (int ix = 1; ix <= nx; ++ix)
            for (int it = 1; it <= ntc; ++it) ui((ix - 1) * ntc + it - 1) = detail::u0(ix * dx, it * dt);
        store(ui * ui.transpose());
    }
    for (int n = 1; n <= cfg.n_levels; ++n) {
        const Eigen::MatrixXd Gbar = P * Gfull * P.transpose();
        const Eigen::MatrixXd Gint = A * K.cwiseProduct(Gbar) * A.transpose();
        for (int a = 0; a < no; ++a) detail::check_value(Gint(out_idx[a], out_idx[a]), n, cfg.grid.z_nodes[a / nto], cfg.grid.t_nodes[a % nto], "chaos_colored");
        store(Gint);
        Gfull.setZero();
        for (int p = 0; p < nc; ++p) {
            const int fp = full(p / ntc + 1, p % ntc + 1);
            for (int q = 0; q < nc; ++q) Gfull(fp, full(q / ntc + 1, q % ntc + 1)) = Gint(p, q);
        }
    }
    return tab;
}

// ----- bounds -------------------------------------------------------------------------

// alpha = 2 beta ^ 1/2
inline double alpha_of(double beta) { return std::min(2 * beta, 0.5); }

// C_{alpha,beta} = 4 C / alpha with C the frozen constant of the K bound.
inline double C_alpha_beta(double beta) {
    if (!(beta > 0)) throw DomainError("C_alpha_beta: beta must be > 0");
    return 4 * constants::ratio_K_C / alpha_of(beta);
}

inline double geometric_bound(int n) { return std::ldexp(1.0, -n); }

// C^n pi^{n/2} / Gamma(n/2 + 1) z^{-1/2} t^{n/2}, C = energy_refined_C (beta >= 1/4)
inline double refined_bound(int n, double z, double t) {
    const double a = constants::energy_refined_C * std::sqrt(M_PI * t);
    return std::exp(n * std::log(a) - std::lgamma(0.5 * n + 1)) / std::sqrt(z);
}

inline double phi_refined(double x) { return std::exp(x * x) * (1 + std::erf(x)); }

// Per-level white ratio bound u0^2 (C_ab t^alpha)^n (zhat v t)^{2 beta - alpha}.
inline double ratio_level_bound(int n, double z, double t, double beta, double q) {
    const double a = alpha_of(beta), u = detail::u0(z, t);
    return u * u * std::pow(q, n) * std::pow(std::max(detail::hat(z), t), 2 * beta - a);
}
inline double white_ratio_q(double t, double beta) { return C_alpha_beta(beta) * std::pow(t, alpha_of(beta)); }

struct ColoredConstants {
    double gamma_t, F_eps, f_eps;
};
inline ColoredConstants colored_constants(const noise::NoiseModel& m, double t, double eps) {
    const double G = noise::gamma_t(m.temporal, t);
    const double F = noise::f_eps(m.spatial, eps);
    const double f = m.spatial(eps);
    return {G, F, f};
}
inline double colored_ratio_q(const noise::NoiseModel& m, double t, double eps, double beta) {
    const auto c = colored_constants(m, t, eps);
    return c.gamma_t * (c.F_eps + c.f_eps) * C_alpha_beta(beta) * std::pow(t, alpha_of(beta));
}

// (Gamma_t F/2)^n [2 U(z/t) + sum_{m=1}^n sum_{k=0}^{m-1} binom(m-1,k) (2 f t / F)^{k+1} / (k+1)!]
inline double tree_bound(int n, double z, double t, const ColoredConstants& c) {
    const double a = 2 * c.f_eps * t / c.F_eps;
    double s = 0;
    for (int m = 1; m <= n; ++m)
        for (int k = 0; k <= m - 1; ++k)
            s += std::exp(std::lgamma(m) - std::lgamma(k + 1) - std::lgamma(m - k) + (k + 1) * std::log(a) -
                          std::lgamma(k + 2));
    return std::pow(0.5 * c.gamma_t * c.F_eps, n) * (2 * kernel::energy_U(z / t) + s);
}
inline double colored_total_bound(double z, double t, const ColoredConstants& c) {
    const double g = c.gamma_t * c.F_eps, u = detail::u0(z, t);
    if (!(g < 2)) return std::numeric_limits<double>::infinity();
    const double d = std::sqrt(2.0) - std::sqrt(g);
    return u * u + kernel::energy_U(z / t) * 2 * g / (2 - g) +
           std::sqrt(2.0) * c.gamma_t * c.f_eps * t / d * std::exp(2 * c.f_eps * t * std::sqrt(g) / (c.F_eps * d));
}

// Sum of a positive sequence from n = N+1 on; terms must eventually decay geometrically.
template <class Term>
double series_tail(int N, Term&& term) {
    double s = 0;
    for (int n = N + 1; n < N + 5000; ++n) {
        const double a = term(n);
        if (!std::isfinite(a)) return std::numeric_limits<double>::infinity();
        s += a;
        if (n > N + 4 && a < 1e-17 * s) return s;
    }
    return std::numeric_limits<double>::infinity();
}

struct SecondMoment {
    double value = 0;
    double tail_bound = 0;  // +inf when no proven bound applies
    std::string tail_source;
};

inline SecondMoment second_moment(const ChaosTable& tab, double z, double t) {
    const auto [i, j] = tab.node(z, t);
    const int N = tab.n_levels();
    SecondMoment out;
    for (int n = 0; n <= N; ++n) out.value += tab.M(n, i, j);
    double best = std::numeric_limits<double>::infinity();
    auto offer = [&](double v, const char* name) {
        if (v < best) {
            best = v;
            out.tail_source = name;
        }
    };
    const double beta = tab.beta;
    if (!tab.colored) {
        offer(geometric_bound(N), "geometric");
        if (beta >= 0.25) offer(series_tail(N, [&](int n) { return refined_bound(n, z, t); }), "refined");
        if (beta > 0) {
            const double q = white_ratio_q(t, beta);
            if (q < 1) offer(ratio_level_bound(N + 1, z, t, beta, q) / (1 - q), "ratio");
        }
    } else {
        const auto c = colored_constants(tab.model, t, tab.eps);
        if (c.gamma_t * c.F_eps < 2) offer(series_tail(N, [&](int n) { return tree_bound(n, z, t, c); }), "tree");
        if (beta > 0) {
            const double q = colored_ratio_q(tab.model, t, tab.eps, beta);
            if (q < 1) offer(ratio_level_bound(N + 1, z, t, beta, q) / (1 - q), "ratio");
        }
    }
    out.tail_bound = best;
    if (!std::isfinite(best)) out.tail_source = "unbounded";
    return out;
}

struct RatioMoment {
    double value = 0;       // sum_{n <= N} M_n / u0^2
    double tail_bound = 0;  // +inf if the ratio series bound does not apply
    double q = 0;           // per-level ratio of the bound
};

inline RatioMoment ratio_moment(const ChaosTable& tab, double z, double t) {
    if (!(tab.beta > 0)) throw DomainError("ratio_moment: needs beta > 0 (the beta = 0 ratio diverges at the boundary)");
    const auto [i, j] = tab.node(z, t);
    const double u = detail::u0(z, t);
    RatioMoment out;
    for (int n = 0; n <= tab.n_levels(); ++n) out.value += tab.M(n, i, j) / (u * u);
    out.q = tab.colored ? colored_ratio_q(tab.model, t, tab.eps, tab.beta) : white_ratio_q(t, tab.beta);
    out.tail_bound = out.q < 1 ? ratio_level_bound(tab.n_levels() + 1, z, t, tab.beta, out.q) / (u * u) / (1 - out.q)
                               : std::numeric_limits<double>::infinity();
    return out;
}

// C_{t,beta} (white) or C_{t,beta,eps} (colored); +inf past the threshold.
inline double ratio_sup_bound(const ChaosTable& tab, double t) {
    const double q = tab.colored ? colored_ratio_q(tab.model, t, tab.eps, tab.beta) : white_ratio_q(t, tab.beta);
    if (!(q < 1)) return std::numeric_limits<double>::infinity();
    return std::pow(std::max(1.0, t), 2 * tab.beta - alpha_of(tab.beta)) / (1 - q);
}

// Largest grid t at which the ratio bound is finite (0 if none).
inline double ratio_threshold(const ChaosTable& tab) {
    double T = 0;
    for (double t : tab.grid.t_nodes)
        if (std::isfinite(ratio_sup_bound(tab, t))) T = t;
    return T;
}

// beta = 0 white level-1 ratio via the exponential integral:
//   (z^2 / (4 t^2)) int_{2z/t}^inf e^{-s}/s ds / u0^2
inline double level1_ratio_beta0(double z, double t) {
    if (!(z > 0) || !(t > 0)) throw DomainError("level1_ratio_beta0: z, t must be > 0");
    const double a = 2 * z / t;
    auto f = [](double s) { return std::exp(-s) / s; };
    double e1 = 0;
    // E1(a) = int_a^inf e^{-s}/s ds, split at 1 so the log singularity is handled by the substitution s = e^y
    if (a < 1) {
        e1 += quad::adaptive([](double y) { return std::exp(-std::exp(y)); }, std::log(a), 0.0, 1e-12).value;
        e1 += quad::adaptive(f, 1.0, 60.0, 1e-12).value;
    } else {
        e1 += quad::adaptive(f, a, a + 60.0, 1e-12).value;
    }
    const double u = detail::u0(z, t);
    return z * z / (4 * t * t) * e1 / (u * u);
}

// ----- K and K-tilde --------------------------------------------------------------------

// K(z, tau; e) = int what^e q0^2(z, w, t - tau) u0^2(w, tau) / u0^2(z, t) dw
inline double K_function(double z, double tau, double t, double exponent, const kernel::QuadratureSpec& q = {}) {
    if (!(z > 0) || !(tau > 0) || !(t > tau) || !(exponent > 0))
        throw DomainError("K_function: need z > 0, 0 < tau < t, exponent > 0");
    const double s = t - tau;
    const kernel::Window win = kernel::window(z, s, q.trunc_c, q.z_max);
    auto f = [&](double w) {
        if (!(w > 0)) return 0.0;
        const double k = kernel::detail::q_any(0.0, z, w, s), u = detail::u0(w, tau);
        return std::pow(detail::hat(w), exponent) * k * k * u * u;
    };
    const auto r = kernel::integrate_w(f, win.v_lo, win.v_hi, {std::sqrt(z), std::sqrt(tau), std::sqrt(s), 1.0},
                                       std::max(q.rel_tol, 1e-10));
    if (!std::isfinite(r.value)) throw AccuracyError("K_function: quadrature failed", r.value);
    const double u = detail::u0(z, t);
    return r.value / (u * u);
}

// K~(z, tau; e) = int what^e q0(z, w, t - tau) u0(w, tau) / u0(z, t) dw
inline double K_tilde(double z, double tau, double t, double exponent, const kernel::QuadratureSpec& q = {}) {
    if (!(z > 0) || !(tau > 0) || !(t > tau) || !(exponent > 0))
        throw DomainError("K_tilde: need z > 0, 0 < tau < t, exponent > 0");
    const double s = t - tau;
    const kernel::Window win = kernel::window(z, s, q.trunc_c, q.z_max);
    auto f = [&](double w) {
        if (!(w > 0)) return 0.0;
        return std::pow(detail::hat(w), exponent) * kernel::detail::q_any(0.0, z, w, s) * detail::u0(w, tau);
    };
    const auto r = kernel::integrate_w(f, win.v_lo, win.v_hi, {std::sqrt(z), std::sqrt(tau), std::sqrt(s), 1.0},
                                       std::max(q.rel_tol, 1e-10));
    if (!std::isfinite(r.value)) throw AccuracyError("K_tilde: quadrature failed", r.value);
    return r.value / detail::u0(z, t);
}

// 4 C (t - tau)^{alpha - 1} (zhat v t)^{2 beta - alpha}, exponent = 2 beta
inline double K_bound(double z, double tau, double t, double exponent) {
    const double beta = 0.5 * exponent, a = alpha_of(beta);
    return 4 * constants::ratio_K_C * std::pow(t - tau, a - 1) * std::pow(std::max(detail::hat(z), t), 2 * beta - a);
}
// 4 C (zhat v (t - tau))^beta, exponent = beta
inline double K_tilde_bound(double z, double tau, double t, double exponent) {
    return 4 * constants::ratio_K_C * std::pow(std::max(detail::hat(z), t - tau), exponent);
}

// ----- L^p ---------------------------------------------------------------------------------

inline double lp_level_bound_white(int n, double z, double t, double p) {
    const double a = constants::energy_refined_C * (p - 1) * std::sqrt(M_PI * t);
    return std::exp(0.5 * n * std::log(a) - 0.5 * std::lgamma(0.5 * n + 1)) / std::pow(z, 0.25);
}

inline double lp_level_bound_colored(int n, double z, double t, double p, const ColoredConstants& c) {
    const double C = constants::energy_refined_C;
    const double a = (p - 1) * c.gamma_t * c.F_eps * C * std::sqrt(M_PI * t);
    const double b = c.f_eps * std::sqrt(t) / (c.F_eps * C * std::sqrt(M_PI));
    double s = 1;
    for (int m = 1; m <= n; ++m)
        for (int k = 0; k <= m - 1; ++k)
            s += std::exp(std::lgamma(m) - std::lgamma(k + 1) - std::lgamma(m - k) + (k + 1) * std::log(b) +
                          std::lgamma(0.5 * n + 1) - std::lgamma(0.5 * (n + k + 1) + 1));
    return std::pow(detail::hat(z), -0.25) * std::exp(0.5 * n * std::log(a) - 0.5 * std::lgamma(0.5 * n + 1)) *
           std::sqrt(s);
}

struct LpBound {
    double partial = 0;  // sum_{n <= N} (p-1)^{n/2} sqrt(M_n)
    double tail = 0;
    double value() const { return partial + tail; }
    std::vector<double> partial_sums;
};

inline LpBound lp_bound(const ChaosTable& tab, double z, double t, double p) {
    if (!(p >= 2)) throw DomainError("lp_bound: p must be >= 2");
    const auto [i, j] = tab.node(z, t);
    const int N = tab.n_levels();
    LpBound out;
    if (p == 2) {
        // chaos levels are orthogonal in L^2: the norm is exact, no triangle inequality
        double s = 0;
        for (int n = 0; n <= N; ++n) out.partial_sums.push_back(std::sqrt(s += tab.M(n, i, j)));
        out.partial = out.partial_sums.back();
        const SecondMoment sm = second_moment(tab, z, t);
        out.tail = std::sqrt(sm.value + sm.tail_bound) - out.partial;
        return out;
    }
    for (int n = 0; n <= N; ++n) {
        out.partial += std::pow(p - 1, 0.5 * n) * std::sqrt(tab.M(n, i, j));
        out.partial_sums.push_back(out.partial);
    }
    if (tab.beta >= 0.25) {
        if (!tab.colored) {
            out.tail = series_tail(N, [&](int n) { return lp_level_bound_white(n, z, t, p); });
        } else {
            const auto c = colored_constants(tab.model, t, tab.eps);
            out.tail = series_tail(N, [&](int n) { return lp_level_bound_colored(n, z, t, p, c); });
        }
    } else {
        if (p >= 3) {
            std::ostringstream os;
            os << "lp_bound: beta = " << tab.beta << " < 1/4 and p = " << p
               << " >= 3: the unrefined series sum ((p-1)/2)^{n/2} diverges";
            throw DomainError(os.str());
        }
        double r;
        if (!tab.colored) {
            r = std::sqrt(0.5 * (p - 1));
        } else {
            const auto c = colored_constants(tab.model, t, tab.eps);
            r = std::sqrt(std::sqrt(p - 1) * c.gamma_t * c.F_eps / 2);
        }
        out.tail = r < 1 ? std::pow(r, N + 1) / (1 - r) : std::numeric_limits<double>::infinity();
        if (tab.colored && std::isfinite(out.tail)) {
            // the bracket of the unrefined colored series grows; fold it in term by term
            const auto c = colored_constants(tab.model, t, tab.eps);
            out.tail = series_tail(N, [&](int n) {
                const double a = 2 * c.f_eps * t / c.F_eps;
                double s = 1;
                for (int m = 1; m <= n; ++m)
                    for (int k = 0; k <= m - 1; ++k)
                        s += std::exp(std::lgamma(m) - std::lgamma(k + 1) - std::lgamma(m - k) + (k + 1) * std::log(a) -
                                      std::lgamma(k + 2));
                return std::pow(r, n) * std::sqrt(s);
            });
        }
    }
    return out;
}

// ----- continuity -------------------------------------------------------------------------

// E|u(z1, t) - u(z2, t)|^2 from the white table: the level-0 difference plus
// sum_n int int what^{2 beta} d0^2 M_{n-1} (M_{n-1} interpolated from the internal tables).
inline double difference_moment(const ChaosTable& tab, double z1, double z2, double t) {
    if (tab.colored) throw DomainError("difference_moment: white tables only");
    if (!(z1 > 0) || !(z2 > 0) || !(t > 0)) throw DomainError("difference_moment: z1, z2, t must be > 0");
    if (t > tab.grid.t_nodes.back() * (1 + 1e-12)) throw DomainError("difference_moment: t beyond the table");
    const double d0 = detail::u0(z1, t) - detail::u0(z2, t);
    double s = d0 * d0;
    if (z1 == z2) return 0.0;
    const int N = tab.n_levels();
    for (int n = 1; n <= N; ++n) {
        const detail::LogTable* pt = n >= 2 ? &tab.ratio_tables[n - 2] : nullptr;
        s += detail::difference_integral(z1, z2, t, tab.beta, tab.engine, [&](double w, double tau) {
            if (!pt) {
                const double u = detail::u0(w, tau);
                return u * u;
            }
            return pt->moment(w, tau);
        });
    }
    return s;
}

struct HolderModulus {
    double Q = 0, Q_tilde = 0;
    double bound_Q = 0, bound_Q_tilde = 0;
    double eta = 0;
};

// eta = ((2 beta - 1/2) ^ 1/4) - lambda/2
inline double holder_eta(double beta, double lambda) { return std::min(2 * beta - 0.5, 0.25) - 0.5 * lambda; }

inline HolderModulus holder_modulus(double z1, double z2, double t, double beta, double lambda,
                                    const EngineSpec& e = {}) {
    if (!(beta > 0.25)) throw DomainError("holder_modulus: needs beta > 1/4");
    if (!(lambda >= 0) || !(lambda < std::min(4 * beta - 1, 0.5)))
        throw DomainError("holder_modulus: lambda must lie in [0, (4 beta - 1) ^ 1/2)");
    if (!(z1 > 0) || !(z2 > 0) || !(t > 0)) throw DomainError("holder_modulus: z1, z2, t must be > 0");
    HolderModulus h;
    h.eta = holder_eta(beta, lambda);
    const double dz = std::abs(z1 - z2);
    h.bound_Q = constants::holder_Q_M * std::pow(t, h.eta) * std::pow(dz, 0.5 * lambda);
    h.bound_Q_tilde = 16.0 / 3.0 * std::pow(t, 0.75) * std::pow(dz, 0.25);
    if (z1 == z2) return h;
    h.Q = detail::difference_integral(z1, z2, t, beta, e, [](double w, double) { return 1 / std::sqrt(w); });
    const double dv = std::abs(std::sqrt(z1) - std::sqrt(z2));
    const double sf = 0.25 * std::min(std::sqrt(std::min(z1, z2)), dv);
    h.Q_tilde = detail::tau_w_integral({z1, z2}, t, sf, true, e, [&](double, double s, const quad::Nodes& wn) {
        double acc = 0;
        for (std::size_t i = 0; i < wn.x.size(); ++i) {
            const double w = wn.x[i];
            if (!(w > 0)) continue;
            const double d = kernel::detail::q_any(0.0, z1, w, s) - kernel::detail::q_any(0.0, z2, w, s);
            acc += wn.w[i] * std::pow(detail::hat(w), beta - 0.25) * d;
        }
        return acc * acc;
    });
    return h;
}

// d0 pointwise bound M |z1 - z2|^{1/2} s^{-3/2}
inline double d0_bound(double z1, double z2, double s) {
    return constants::holder_M * std::sqrt(std::abs(z1 - z2)) * std::pow(s, -1.5);
}

// ----- ledger -------------------------------------------------------------------------------

struct LedgerRow {
    int n = 0;
    double z = 0, t = 0, value = 0;
    std::string bound_name;
    double bound_value = 0;
    double margin() const { return bound_value - value; }
    // holds within relative slack
    bool holds(double rel) const { return !(value > bound_value * (1 + rel) + 1e-300); }
};

struct FittedConstant {
    std::string name;
    double value;
    std::string provenance;
};

struct BoundLedger {
    std::vector<LedgerRow> rows;
    std::vector<FittedConstant> constants;
    bool all_hold(double rel) const {
        return std::all_of(rows.begin(), rows.end(), [&](const LedgerRow& r) { return r.holds(rel); });
    }
};

inline std::vector<FittedConstant> fitted_constants() {
    return {
        {"C_gauss_refined", constants::gauss_refined_C, "sup of q0 over its refined Gaussian envelope, zw >= t^2 (tools/fit_constants)"},
        {"C_refined", constants::energy_refined_C, "sup of sqrt(z s) int q0^2 dw (tools/fit_constants)"},
        {"C_K", constants::ratio_K_C, "sup of K and K-tilde over their bounds / 4C, beta in {1/4, 1/2, 3/4} (tools/fit_constants)"},
        {"C_alpha_beta(beta=1/2)", 4 * constants::ratio_K_C / 0.5, "4 C_K / alpha"},
        {"M_holder", constants::holder_M, "sup |d0| s^{3/2} / |dz|^{1/2} (tools/fit_constants)"},
        {"M_beta_lambda(1/2,0.4)", constants::holder_Q_M, "sup Q_t / (t^eta |dz|^{lambda/2}) (tools/fit_constants)"},
    };
}

// Every applicable per-level and total bound at every grid node.
inline BoundLedger build_ledger(const ChaosTable& tab) {
    BoundLedger L;
    L.constants = fitted_constants();
    const int N = tab.n_levels();
    for (int i = 0; i < tab.nz(); ++i)
        for (int j = 0; j < tab.nt(); ++j) {
            const double z = tab.grid.z_nodes[i], t = tab.grid.t_nodes[j];
            auto add = [&](int n, double v, const char* name, double b) { L.rows.push_back({n, z, t, v, name, b}); };
            if (!tab.colored) {
                for (int n = 1; n <= N; ++n) add(n, tab.M(n, i, j), "geometric_2^-n", geometric_bound(n));
                add(1, tab.M(1, i, j), "U(z/t)", kernel::energy_U(z / t));
                if (tab.beta >= 0.25)
                    for (int n = 1; n <= N; ++n) add(n, tab.M(n, i, j), "refined", refined_bound(n, z, t));
                if (tab.beta > 0) {
                    const double q = white_ratio_q(t, tab.beta);
                    for (int n = 1; n <= N; ++n) add(n, tab.M(n, i, j), "ratio_level", ratio_level_bound(n, z, t, tab.beta, q));
                }
                const SecondMoment sm = second_moment(tab, z, t);
                if (tab.beta == 0) add(N, sm.value + sm.tail_bound, "sum_le_2", 2.0);
            } else {
                const auto c = colored_constants(tab.model, t, tab.eps);
                add(1, tab.M(1, i, j), "u1_colored", c.gamma_t * (0.5 * c.F_eps + c.f_eps * t));
                for (int n = 1; n <= N; ++n) add(n, tab.M(n, i, j), "tree", tree_bound(n, z, t, c));
                if (tab.beta > 0) {
                    const double q = colored_ratio_q(tab.model, t, tab.eps, tab.beta);
                    for (int n = 1; n <= N; ++n) add(n, tab.M(n, i, j), "ratio_level", ratio_level_bound(n, z, t, tab.beta, q));
                }
                // the closed-form total applies once Gamma_t F_eps < 1
                if (c.gamma_t * c.F_eps < 1) {
                    const SecondMoment sm = second_moment(tab, z, t);
                    add(N, sm.value + sm.tail_bound, "total_colored", colored_total_bound(z, t, c));
                }
            }
            if (tab.beta > 0) {
                const RatioMoment rm = ratio_moment(tab, z, t);
                add(N, rm.value + rm.tail_bound, "ratio_sup_C_t", ratio_sup_bound(tab, t));
            }
        }
    return L;
}

namespace detail {
inline void write_num(std::ostream& os, double v) {
    if (std::isnan(v))
        os << "nan";
    else if (std::isinf(v))
        os << (v > 0 ? "inf" : "-inf");
    else
        os << std::setprecision(12) << v;
}
}  // namespace detail

inline void write_header(std::ostream& os) { os << "n,z,t,value,bound_name,bound_value,margin\n"; }

inline void write_csv(std::ostream& os, const BoundLedger& L, bool header = true) {
    if (header) write_header(os);
    for (const auto& r : L.rows) {
        os << r.n << ',';
        detail::write_num(os, r.z);
        os << ',';
        detail::write_num(os, r.t);
        os << ',';
        detail::write_num(os, r.value);
        os << ',' << r.bound_name << ',';
        detail::write_num(os, r.bound_value);
        os << ',';
        detail::write_num(os, r.margin());
        os << '\n';
    }
}

inline void write_csv(std::ostream& os, const ChaosTable& tab, bool header = true) {
    if (header) write_header(os);
    for (int n = 0; n <= tab.n_levels(); ++n)
        for (int i = 0; i < tab.nz(); ++i)
            for (int j = 0; j < tab.nt(); ++j) {
                os << n << ',';
                detail::write_num(os, tab.grid.z_nodes[i]);
                os << ',';
                detail::write_num(os, tab.grid.t_nodes[j]);
                os << ',';
                detail::write_num(os, tab.M(n, i, j));
                os << ",none,nan,nan\n";
            }
}

}  // namespace kimura::chaos
