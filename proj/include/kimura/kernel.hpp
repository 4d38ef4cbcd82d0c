#pragma once

// Fundamental solution q_nu of the Kimura equation with constant drift, its
// closed-form integrals, the semigroup action and the Duhamel series for a
// bounded potential.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kimura/errors.hpp"
#include "kimura/quadrature.hpp"
#include "kimura/specfun.hpp"

namespace kimura::kernel {

struct KernelParams {
    double nu = 0.0;
    void validate() const {
        if (!std::isfinite(nu) || !(nu < 1.0)) throw DomainError("KernelParams.nu must be finite and < 1");
    }
};

struct QuadratureSpec {
    double z_max = 1e6;              // hard cap on the spatial window
    int base_points = 16;            // Gauss-Legendre points per panel
    double singularity_grading = 2;  // s = t u^g toward the singular endpoint
    double abs_tol = 1e-14;
    double rel_tol = 1e-10;
    double trunc_c = 8.0;            // window (sqrt z +- c sqrt t)^2

    void validate() const {
        if (!(z_max > 0)) throw DomainError("QuadratureSpec.z_max must be > 0");
        if (!(abs_tol > 0 && abs_tol <= 1e-2)) throw DomainError("QuadratureSpec.abs_tol must lie in (0, 1e-2]");
        if (!(rel_tol > 0 && rel_tol <= 1e-2)) throw DomainError("QuadratureSpec.rel_tol must lie in (0, 1e-2]");
        if (!(singularity_grading >= 1 && singularity_grading <= 4))
            throw DomainError("QuadratureSpec.singularity_grading must lie in [1, 4]");
        if (!(trunc_c > 0)) throw DomainError("QuadratureSpec.trunc_c must be > 0");
        quad::gauss_legendre(base_points);
    }
};

// Piecewise-linear potential through (z_i, V_i), constant beyond the end nodes.
class PotentialSpec {
  public:
    PotentialSpec() = default;
    PotentialSpec(std::vector<double> z, std::vector<double> v) : z_(std::move(z)), v_(std::move(v)) {
        if (z_.empty() || z_.size() != v_.size()) throw DomainError("PotentialSpec: need matching non-empty samples");
        for (std::size_t i = 0; i < z_.size(); ++i) {
            if (!(z_[i] > 0) || !std::isfinite(v_[i])) throw DomainError("PotentialSpec: nodes must be > 0, values finite");
            if (i > 0 && !(z_[i] > z_[i - 1])) throw DomainError("PotentialSpec: nodes must increase");
        }
        for (double x : v_) sup_ = std::max(sup_, std::abs(x));
    }
    static PotentialSpec constant(double c) { return PotentialSpec({1.0}, {c}); }

    double sup_norm() const { return sup_; }
    double operator()(double z) const {
        if (z <= z_.front()) return v_.front();
        if (z >= z_.back()) return v_.back();
        const auto it = std::upper_bound(z_.begin(), z_.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - z_.begin()) - 1;
        const double a = (z - z_[i]) / (z_[i + 1] - z_[i]);
        return (1 - a) * v_[i] + a * v_[i + 1];
    }
    bool is_zero() const { return sup_ == 0.0; }
    const std::vector<double>& nodes() const { return z_; }

  private:
    std::vector<double> z_{1.0}, v_{0.0};
    double sup_ = 0.0;
};

namespace detail {

inline void require_positive(double z, double w, double t, const char* op) {
    if (!(z > 0) || !(w > 0) || !(t > 0) || !std::isfinite(z) || !std::isfinite(w) || !std::isfinite(t))
        throw DomainError(std::string(op) + ": arguments must be positive and finite");
}

// q_nu for nu <= 1 without argument checks; nu = 1 is the conservative kernel.
inline double q_any(double nu, double z, double w, double t) {
    const double x = 2.0 * std::sqrt(z * w) / t;
    if (x < 1e-6) {
        // I_{1-nu}(x) ~ (x/2)^{1-nu} / Gamma(2-nu)
        return std::pow(z, 1.0 - nu) * std::pow(t, nu - 2.0) * std::exp(-(z + w) / t) / std::tgamma(2.0 - nu);
    }
    const double d = std::sqrt(z) - std::sqrt(w);
    const double pref = nu == 0.0 ? std::sqrt(z / w) : (nu == 1.0 ? 1.0 : std::pow(z / w, 0.5 * (1.0 - nu)));
    return pref / t * std::exp(-d * d / t) * specfun::bessel_i_scaled_fast(1.0 - nu, x);
}

}  // namespace detail

inline double q_nu(const KernelParams& p, double z, double w, double t) {
    p.validate();
    detail::require_positive(z, w, t, "q_nu");
    return detail::q_any(p.nu, z, w, t);
}

inline double q0(double z, double w, double t) {
    detail::require_positive(z, w, t, "q0");
    return detail::q_any(0.0, z, w, t);
}

inline double q1(double z, double w, double t) {
    detail::require_positive(z, w, t, "q1");
    return detail::q_any(1.0, z, w, t);
}

inline double q0_dz(double z, double w, double t) { return (q1(z, w, t) - q0(z, w, t)) / t; }

// Gaussian upper bounds for q0; the refined one applies when z w >= t^2.
inline double q0_gaussian_bound(double z, double w, double t) {
    const double d = std::sqrt(z) - std::sqrt(w);
    return z / (t * t) * std::exp(-d * d / t);
}
inline double q0_gaussian_bound_refined(double z, double w, double t, double C) {
    const double d = std::sqrt(z) - std::sqrt(w);
    return C * std::pow(z, 0.25) * std::pow(w, -0.75) / std::sqrt(t) * std::exp(-d * d / t);
}

inline double mass_q0(double z, double t) {
    detail::require_positive(z, 1.0, t, "mass_q0");
    return -std::expm1(-z / t);
}
inline double absorbed_mass(double z, double t) {
    detail::require_positive(z, 1.0, t, "absorbed_mass");
    return std::exp(-z / t);
}
inline double mass_q1(double z, double t) {
    detail::require_positive(z, 1.0, t, "mass_q1");
    return 1.0;
}

struct TruncatedIntegral {
    double value = 0.0;
    double tail = 0.0;       // estimate (or bound) of the discarded mass
    bool truncated = false;  // tail exceeded rel_tol * |value|
};

struct Window {
    double v_lo, v_hi;
};

// sqrt-space window that carries all but a Gaussian tail of a kernel at (z, t).
inline Window window(double z, double t, double c, double z_max) {
    const double a = std::sqrt(z), r = c * std::sqrt(t);
    return {std::max(0.0, a - r), std::min(a + r, std::sqrt(z_max))};
}

// Integral over w in (0, inf) of f(w), done in v = sqrt(w) over [v_lo, v_hi].
template <class F>
quad::Result integrate_w(F&& f, double v_lo, double v_hi, std::vector<double> peaks, double rel_tol,
                         unsigned max_depth = 18) {
    std::vector<double> br{v_lo};
    std::sort(peaks.begin(), peaks.end());
    for (double p : peaks)
        if (p > v_lo && p < v_hi) br.push_back(p);
    br.push_back(v_hi);
    auto g = [&](double v) { return v > 0 ? 2.0 * v * f(v * v) : 0.0; };
    return quad::adaptive_panels(g, br, rel_tol, max_depth);
}

// Bound on the q0 mass outside the window, from the Gaussian bound.
inline double q0_tail_bound(double z, double t, const Window& win) {
    const double a = std::sqrt(z), st = std::sqrt(t);
    const double c_hi = (win.v_hi - a) / st;
    double tail = z / (t * t) * (t * std::exp(-c_hi * c_hi) + a * std::sqrt(M_PI * t) * std::erfc(c_hi));
    if (win.v_lo > 0) {
        const double c_lo = (a - win.v_lo) / st;
        tail += z / (t * t) * win.v_lo * win.v_lo * std::exp(-c_lo * c_lo);
    }
    return tail;
}

inline TruncatedIntegral mass_q0_quadrature(double z, double t, const QuadratureSpec& q = {}) {
    detail::require_positive(z, 1.0, t, "mass_q0_quadrature");
    const Window win = window(z, t, q.trunc_c, q.z_max);
    TruncatedIntegral r;
    r.value = integrate_w([&](double w) { return w > 0 ? detail::q_any(0.0, z, w, t) : 0.0; }, win.v_lo, win.v_hi,
                          {std::sqrt(z)}, q.rel_tol)
                  .value;
    r.tail = q0_tail_bound(z, t, win);
    r.truncated = r.tail > q.rel_tol * std::abs(r.value);
    return r;
}

inline TruncatedIntegral mass_q1_quadrature(double z, double t, const QuadratureSpec& q = {}) {
    detail::require_positive(z, 1.0, t, "mass_q1_quadrature");
    const Window win = window(z, t, q.trunc_c, q.z_max);
    TruncatedIntegral r;
    auto f = [&](double w) { return w > 0 ? detail::q_any(1.0, z, w, t) : 0.0; };
    r.value = integrate_w(f, win.v_lo, win.v_hi, {std::sqrt(z)}, q.rel_tol).value;
    // discarded mass estimated on the next band out
    const double st = std::sqrt(t);
    r.tail = integrate_w(f, win.v_hi, win.v_hi + q.trunc_c * st, {}, 1e-6).value;
    if (win.v_lo > 0) r.tail += integrate_w(f, 0.0, win.v_lo, {}, 1e-6).value;
    r.truncated = r.tail > q.rel_tol * std::abs(r.value);
    return r;
}

// Closed forms of int q0^2(z, w, s) dw.
inline double energy_density_q0_bessel(double z, double s) {
    detail::require_positive(z, 1.0, s, "energy_density_q0");
    const double x = z / s;
    return z / (s * s) * (specfun::bessel_i_scaled(0, x) - specfun::bessel_i_scaled(1, x) - std::exp(-2 * x));
}
inline double energy_density_q0_pfq(double z, double s) {
    detail::require_positive(z, 1.0, s, "energy_density_q0");
    const double x = z / s;
    // (z^2 / (2 s^3)) e^{-2x} 2F2(2x) = (z / (4 s^2)) * [e^{-2x} (2x) 2F2(2x)]
    return z / (4 * s * s) * specfun::pfq_scaled({{1.5, 1.0}, {2.0, 3.0}}, 2 * x, 1.0);
}
// The Bessel bracket cancels for both small and large z/s; the 2F2 form does not.
inline double energy_density_q0(double z, double s) { return energy_density_q0_pfq(z, s); }
inline double energy_density_q0_quadrature(double z, double s, const QuadratureSpec& q = {}) {
    detail::require_positive(z, 1.0, s, "energy_density_q0_quadrature");
    const Window win = window(z, s, q.trunc_c, q.z_max);
    return integrate_w(
               [&](double w) {
                   const double v = w > 0 ? detail::q_any(0.0, z, w, s) : 0.0;
                   return v * v;
               },
               win.v_lo, win.v_hi, {std::sqrt(z)}, q.rel_tol)
        .value;
}

// U(x) = e^{-x} I_0(x) - e^{-2x} / 2 = int_0^t energy_density_q0(z, s) ds at x = z/t.
inline double energy_U(double x) {
    if (!(x >= 0) || !std::isfinite(x)) throw DomainError("energy_U: x must be finite and >= 0");
    return specfun::bessel_i_scaled(0, x) - 0.5 * std::exp(-2 * x);
}

// int_0^t int q0^2 dw ds fully by quadrature (no closed form inside).
inline double energy_integral_quadrature(double z, double t, const QuadratureSpec& q = {}) {
    detail::require_positive(z, 1.0, t, "energy_integral_quadrature");
    const double g = q.singularity_grading;
    auto outer = [&](double u) {
        if (u <= 0) return 0.0;
        const double s = t * std::pow(u, g);
        const double jac = t * g * std::pow(u, g - 1);
        return jac * energy_density_q0_quadrature(z, s, q);
    };
    return quad::adaptive(outer, 0.0, 1.0, std::max(q.rel_tol, 1e-9)).value;
}

// Closed forms of int q_nu^2(z, w, s) dz for nu in {0, 1}.
inline double z_energy_q_nu(int nu, double w, double s) {
    detail::require_positive(1.0, w, s, "z_energy_q_nu");
    const double y = 2 * w / s;
    if (nu == 1) return specfun::pfq_scaled({{0.5, 1.0}, {1.0, 1.0}}, y, 0.0) / (2 * s);
    if (nu == 0) return specfun::pfq_scaled({{1.5, 3.0}, {2.0, 3.0}}, y, 0.0) / (4 * s);
    throw DomainError("z_energy_q_nu: nu must be 0 or 1");
}
inline double z_energy_q_nu_quadrature(int nu, double w, double s, const QuadratureSpec& q = {}) {
    detail::require_positive(1.0, w, s, "z_energy_q_nu_quadrature");
    if (nu != 0 && nu != 1) throw DomainError("z_energy_q_nu_quadrature: nu must be 0 or 1");
    const Window win = window(w, s, q.trunc_c, q.z_max);
    return integrate_w(
               [&](double z) {
                   const double v = z > 0 ? detail::q_any(nu, z, w, s) : 0.0;
                   return v * v;
               },
               win.v_lo, win.v_hi, {std::sqrt(w)}, q.rel_tol)
        .value;
}

// (P_t u0)(z) = int q_nu(z, w, t) u0(w) dw over the truncation window.
template <class U0>
TruncatedIntegral propagate(const KernelParams& p, U0&& u0, double z, double t, const QuadratureSpec& q = {}) {
    p.validate();
    detail::require_positive(z, 1.0, t, "propagate");
    const Window win = window(z, t, q.trunc_c, q.z_max);
    TruncatedIntegral r;
    auto f = [&](double w) { return w > 0 ? detail::q_any(p.nu, z, w, t) * u0(w) : 0.0; };
    r.value = integrate_w(f, win.v_lo, win.v_hi, {std::sqrt(z)}, q.rel_tol).value;
    if (p.nu == 0.0) {
        double sup = 0.0;
        const double st = std::sqrt(t);
        for (int k = 0; k <= 8; ++k) {
            const double v = win.v_hi + k * st;
            sup = std::max(sup, std::abs(u0(v * v)));
            if (win.v_lo > 0) sup = std::max(sup, std::abs(u0(win.v_lo * win.v_lo * k / 8.0 + 1e-300)));
        }
        r.tail = sup * q0_tail_bound(z, t, win);
    } else {
        auto fa = [&](double w) { return w > 0 ? detail::q_any(p.nu, z, w, t) * std::abs(u0(w)) : 0.0; };
        r.tail = integrate_w(fa, win.v_hi, win.v_hi + q.trunc_c * std::sqrt(t), {}, 1e-6).value;
        if (win.v_lo > 0) r.tail += integrate_w(fa, 0.0, win.v_lo, {}, 1e-6).value;
    }
    r.truncated = r.tail > q.rel_tol * std::abs(r.value);
    return r;
}

// P_t (P_s u0)(z): first a step of length s, then one of length t.
template <class U0>
TruncatedIntegral propagate_two_step(const KernelParams& p, U0&& u0, double z, double s, double t,
                                     const QuadratureSpec& q = {}) {
    QuadratureSpec inner = q;
    inner.rel_tol = std::max(q.rel_tol * 0.1, 1e-13);
    double tail_inner = 0.0;
    auto mid = [&](double w) {
        const TruncatedIntegral r = propagate(p, u0, w, s, inner);
        tail_inner = std::max(tail_inner, r.tail);
        return r.value;
    };
    TruncatedIntegral r = propagate(p, mid, z, t, q);
    r.tail += tail_inner;
    r.truncated = r.tail > q.rel_tol * std::abs(r.value);
    return r;
}

// int q_nu(z, x, s) q_nu(x, w, t) dx, which should equal q_nu(z, w, s + t).
inline double semigroup_compose(const KernelParams& p, double z, double w, double s, double t,
                                const QuadratureSpec& q = {}) {
    p.validate();
    detail::require_positive(z, w, s, "semigroup_compose");
    detail::require_positive(z, w, t, "semigroup_compose");
    const double lo = std::max(0.0, std::min(std::sqrt(z) - q.trunc_c * std::sqrt(s), std::sqrt(w) - q.trunc_c * std::sqrt(t)));
    const double hi = std::max(std::sqrt(z) + q.trunc_c * std::sqrt(s), std::sqrt(w) + q.trunc_c * std::sqrt(t));
    auto f = [&](double x) { return x > 0 ? detail::q_any(p.nu, z, x, s) * detail::q_any(p.nu, x, w, t) : 0.0; };
    return integrate_w(f, lo, hi, {std::sqrt(z), std::sqrt(w)}, q.rel_tol).value;
}

struct DuhamelResult {
    double value = 0.0;
    std::vector<double> per_term;
};

namespace detail {

// Fixed panels in v = sqrt(x) resolving a kernel peak of width ~sqrt(s) at v = a.
inline void add_peak_breaks(std::vector<double>& br, double a, double s, double c) {
    const double r = std::sqrt(s);
    for (double j : {0.0, 0.5, 1.0, 2.0, 3.5, 5.5}) {
        if (j > c) break;
        br.push_back(a - j * r);
        br.push_back(a + j * r);
    }
}

// q_{nu,k}(z, w, t) = int_0^t int q_nu(z, x, t - tau) V(x) q_{nu,k-1}(x, w, tau) dx dtau.
// Fixed rules throughout so nested levels stay smooth in their arguments.
inline constexpr int n_tau_nested = 6, n_x_nested = 4;
inline double duhamel_term(double nu, const PotentialSpec& V, int k, double z, double w, double t,
                           const QuadratureSpec& q, int n_tau, int n_x) {
    if (k == 0) return q_any(nu, z, w, t);
    const double g = q.singularity_grading;
    const double c = q.trunc_c;
    // tau graded toward both ends of (0, t): tau = t/2 u^g and tau = t - t/2 u^g
    const quad::Rule& rule = quad::gauss_legendre(n_tau);
    double total = 0.0;
    for (int half = 0; half < 2; ++half) {
        for (std::size_t i = 0; i < rule.x.size(); ++i) {
            const double u = 0.5 * (rule.x[i] + 1.0);
            const double du = 0.5 * rule.w[i];
            const double h = 0.5 * t * std::pow(u, g);
            const double jac = 0.5 * t * g * std::pow(u, g - 1);
            const double tau = half == 0 ? h : t - h;
            const double s = t - tau;
            if (!(tau > 0) || !(s > 0)) continue;
            const double lo = std::max(0.0, std::min(std::sqrt(z) - c * std::sqrt(s), std::sqrt(w) - c * std::sqrt(tau)));
            const double hi = std::max(std::sqrt(z) + c * std::sqrt(s), std::sqrt(w) + c * std::sqrt(tau));
            std::vector<double> br{lo, hi};
            add_peak_breaks(br, std::sqrt(z), s, c);
            add_peak_breaks(br, std::sqrt(w), tau, c);
            for (double n : V.nodes()) br.push_back(std::sqrt(n));
            std::erase_if(br, [&](double b) { return b < lo || b > hi; });
            std::sort(br.begin(), br.end());
            const quad::Nodes nodes = quad::composite(br, n_x);
            double inner = 0.0;
            for (std::size_t m = 0; m < nodes.x.size(); ++m) {
                const double v = nodes.x[m], x = v * v;
                if (!(x > 0)) continue;
                const double vx = V(x);
                if (vx == 0.0) continue;
                inner += nodes.w[m] * 2 * v * q_any(nu, z, x, s) * vx *
                         duhamel_term(nu, V, k - 1, x, w, tau, q, n_tau_nested, n_x_nested);
            }
            total += du * jac * inner;
        }
    }
    return total;
}

}  // namespace detail

// Partial Duhamel sum of q^V up to n_terms terms (k = 0 .. n_terms - 1).
inline DuhamelResult duhamel_qV(const KernelParams& p, const PotentialSpec& V, double z, double w, double t,
                                int n_terms, const QuadratureSpec& q = {}) {
    p.validate();
    q.validate();
    detail::require_positive(z, w, t, "duhamel_qV");
    if (n_terms < 1 || n_terms > 5) throw DomainError("duhamel_qV: n_terms must lie in [1, 5]");
    DuhamelResult r;
    for (int k = 0; k < n_terms; ++k) {
        double v = 0.0;
        if (k == 0 || !V.is_zero()) {
            v = detail::duhamel_term(p.nu, V, k, z, w, t, q, q.base_points, 8);
            if (!std::isfinite(v)) throw AccuracyError("duhamel_qV: non-finite value in term " + std::to_string(k), v);
        }
        r.per_term.push_back(v);
        r.value += v;
    }
    return r;
}

}  // namespace kimura::kernel
