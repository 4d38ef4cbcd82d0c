#pragma once

// Scaled modified Bessel functions, generalized hypergeometric series and the
// gamma-family helpers the kernel formulas are built from.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "kimura/errors.hpp"

namespace kimura::specfun {

struct SeriesControl {
    double rel_tol = 1e-15;
    int max_terms = 200000;
    double asymptotic_switch = 30.0;

    void validate() const {
        if (!(rel_tol > 0.0 && rel_tol <= 1e-3))
            throw DomainError("SeriesControl.rel_tol must lie in (0, 1e-3]");
        if (max_terms < 32) throw DomainError("SeriesControl.max_terms must be >= 32");
        if (!(asymptotic_switch > 0.0))
            throw DomainError("SeriesControl.asymptotic_switch must be > 0");
    }
};

inline SeriesControl bessel_control() { return {}; }
inline SeriesControl pfq_control() { return {1e-15, 200000, 60.0}; }

struct HypergeometricSpec {
    std::vector<double> upper;
    std::vector<double> lower;

    void validate() const {
        for (double b : lower) {
            if (!std::isfinite(b)) throw DomainError("pFq lower parameter not finite");
            if (b <= 0.0 && b == std::floor(b))
                throw DomainError("pFq lower parameter is a non-positive integer");
        }
        for (double a : upper)
            if (!std::isfinite(a)) throw DomainError("pFq upper parameter not finite");
    }
    // a_1 + ... + a_p - b_1 - ... - b_q
    double nu() const {
        double s = 0.0;
        for (double a : upper) s += a;
        for (double b : lower) s -= b;
        return s;
    }
};

namespace detail {

inline void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw DomainError(std::string(what) + ": non-finite argument");
}

// Sum of positive terms given in log form, accumulated relative to a running
// maximum so that nothing overflows.
struct LogSum {
    double log_scale = -std::numeric_limits<double>::infinity();
    double acc = 0.0;  // sum / exp(log_scale)

    void add(double log_term, double sign = 1.0) {
        if (log_term > log_scale) {
            acc = acc * std::exp(log_scale - log_term) + sign;
            log_scale = log_term;
        } else {
            acc += sign * std::exp(log_term - log_scale);
        }
    }
    double value() const { return acc == 0.0 ? 0.0 : acc * std::exp(log_scale); }
};

}  // namespace detail

// e^{-x} I_order(x) by the power series, summed outward from its largest term.
inline double bessel_i_scaled_series(double order, double x, const SeriesControl& ctl = {}) {
    if (x == 0.0) return order == 0.0 ? 1.0 : 0.0;
    const double h = 0.5 * x;
    const double lh = std::log(h);
    // ratio t_{m+1}/t_m = h^2 / ((m+1)(m+order+1)) crosses 1 here
    double mstar = std::ceil(0.5 * (-(order + 2.0) + std::sqrt(order * order + x * x)));
    mstar = std::max(0.0, mstar);
    const double log_peak = -x + (2.0 * mstar + order) * lh - std::lgamma(mstar + 1.0) -
                            std::lgamma(mstar + order + 1.0);
    double sum = 1.0;  // in units of the peak term
    int terms = 1;
    double term = 1.0;
    for (double m = mstar;; m += 1.0) {
        term *= h * h / ((m + 1.0) * (m + order + 1.0));
        sum += term;
        if (term < ctl.rel_tol * sum * 0.1) break;
        if (++terms > ctl.max_terms)
            throw AccuracyError("bessel_i_scaled: series term cap exceeded", sum * std::exp(log_peak));
    }
    term = 1.0;
    for (double m = mstar; m > 0.0; m -= 1.0) {
        term *= m * (m + order) / (h * h);
        sum += term;
        if (term < ctl.rel_tol * sum * 0.1) break;
        if (++terms > ctl.max_terms)
            throw AccuracyError("bessel_i_scaled: series term cap exceeded", sum * std::exp(log_peak));
    }
    return sum * std::exp(log_peak);
}

// Large-argument expansion e^{-x}I_v(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(v) x^{-k}.
inline double bessel_i_scaled_asymptotic(double order, double x, const SeriesControl& ctl = {}) {
    if (!(x > 0.0)) throw DomainError("bessel_i_scaled_asymptotic: x must be > 0");
    const double mu = 4.0 * order * order;
    double term = 1.0, sum = 1.0, prev_abs = 1.0;
    for (int k = 1; k <= ctl.max_terms; ++k) {
        const double odd = 2.0 * k - 1.0;
        const double next = -term * (mu - odd * odd) / (8.0 * k * x);
        if (next == 0.0) break;
        if (std::abs(next) > prev_abs) {
            // divergent tail reached; accept only if already accurate
            if (prev_abs > 1e3 * ctl.rel_tol * std::abs(sum))
                throw AccuracyError("bessel_i_scaled: asymptotic series diverged before tolerance",
                                    sum / std::sqrt(2.0 * M_PI * x));
            break;
        }
        term = next;
        sum += term;
        prev_abs = std::abs(term);
        if (prev_abs < ctl.rel_tol * std::abs(sum) * 0.1) break;
    }
    return sum / std::sqrt(2.0 * M_PI * x);
}

inline double bessel_i_scaled(double order, double x, const SeriesControl& ctl = {}) {
    detail::require_finite(order, "bessel_i_scaled");
    detail::require_finite(x, "bessel_i_scaled");
    if (order < 0.0) throw DomainError("bessel_i_scaled: order must be >= 0");
    if (x < 0.0) throw DomainError("bessel_i_scaled: x must be >= 0");
    if (x < ctl.asymptotic_switch) return bessel_i_scaled_series(order, x, ctl);
    return bessel_i_scaled_asymptotic(order, x, ctl);
}

// Hot-path variant for the kernel: integer orders 0 and 1 go through Boost's
// rational approximations while the unscaled value is representable.
inline double bessel_i_scaled_fast(double order, double x) {
    if ((order == 0.0 || order == 1.0) && x >= 0.0 && x < 700.0)
        return boost::math::cyl_bessel_i(order, x) * std::exp(-x);
    return bessel_i_scaled(order, x);
}

// Self-test of I_0' = I_1: central difference of e^{-x}I_0 undone back to I_0'.
// Everything stays in scaled form: I_0'(x) e^{-x} = d/dx[e^{-x}I_0] + e^{-x}I_0.
inline double bessel_i_prime_identity_check(double x, double h, const SeriesControl& ctl = {}) {
    if (x < 0.0) throw DomainError("bessel_i_prime_identity_check: x must be >= 0");
    if (!(h > 0.0 && h <= 1e-4)) throw DomainError("bessel_i_prime_identity_check: h must lie in (0, 1e-4]");
    auto g = [&](double y) {
        // I_0 is even, so the scaled value at negative y is e^{-y} I_0(|y|)
        return y >= 0.0 ? bessel_i_scaled(0.0, y, ctl) : std::exp(-2.0 * y) * bessel_i_scaled(0.0, -y, ctl);
    };
    const double dg = (g(x + h) - g(x - h)) / (2.0 * h);
    const double i0p_scaled = dg + g(x);
    const double i1_scaled = bessel_i_scaled(1.0, x, ctl);
    // compare in unscaled units relative to 1 + I_1(x); for large x both sides
    // carry the same e^{x} so the scaled residual is the meaningful one
    const double scale = x < 700.0 ? std::exp(x) : 1.0;
    const double residual = std::abs(i0p_scaled - i1_scaled) * scale;
    return residual / (1.0 + i1_scaled * scale);
}

inline double gamma_fn(double a) {
    detail::require_finite(a, "gamma_fn");
    if (a <= 0.0 && a == std::floor(a)) throw DomainError("gamma_fn: pole at non-positive integer");
    return std::tgamma(a);
}

inline double incomplete_gamma_upper(double a, double z) {
    detail::require_finite(a, "incomplete_gamma_upper");
    detail::require_finite(z, "incomplete_gamma_upper");
    if (!(a > 0.0)) throw DomainError("incomplete_gamma_upper: a must be > 0");
    if (z < 0.0) throw DomainError("incomplete_gamma_upper: z must be >= 0");
    if (z == 0.0) return std::tgamma(a);
    return boost::math::tgamma(a, z);
}

inline double incomplete_gamma_lower(double a, double z) {
    if (!(a > 0.0)) throw DomainError("incomplete_gamma_lower: a must be > 0");
    if (z < 0.0) throw DomainError("incomplete_gamma_lower: z must be >= 0");
    if (z == 0.0) return 0.0;
    return boost::math::tgamma_lower(a, z);
}

inline double pochhammer(double a, int n) {
    detail::require_finite(a, "pochhammer");
    if (n < 0) throw DomainError("pochhammer: n must be >= 0");
    return boost::math::rising_factorial(a, static_cast<unsigned>(n));
}

inline double erf(double x) {
    detail::require_finite(x, "erf");
    return std::erf(x);
}

// pFq(x) by the term-ratio recurrence.
inline double pfq(const HypergeometricSpec& spec, double x, const SeriesControl& ctl = pfq_control()) {
    spec.validate();
    detail::require_finite(x, "pfq");
    double term = 1.0, sum = 1.0, max_abs = 1.0;
    for (int n = 0;; ++n) {
        if (n >= ctl.max_terms) throw AccuracyError("pfq: term cap exceeded", sum);
        double r = x / (n + 1.0);
        for (double a : spec.upper) r *= a + n;
        for (double b : spec.lower) r /= b + n;
        term *= r;
        if (!std::isfinite(term) || !std::isfinite(sum + term))
            throw AccuracyError("pfq: overflow, use pfq_scaled", sum);
        sum += term;
        max_abs = std::max(max_abs, std::abs(term));
        if (term == 0.0) break;  // terminating series
        // stop once terms are shrinking and negligible
        if (std::abs(r) < 1.0 && std::abs(term) < ctl.rel_tol * std::abs(sum) * 0.1) break;
    }
    if (max_abs > std::abs(sum) / std::sqrt(ctl.rel_tol) && max_abs > 1.0)
        throw AccuracyError("pfq: cancellation in alternating series", sum);
    return sum;
}

namespace detail {

// Coefficients c_k of the exponential asymptotic expansion
//   pFp(x) ~ [prod Gamma(b)/prod Gamma(a)] e^x x^nu sum_k c_k x^{-k},
// obtained by substituting the ansatz into the hypergeometric ODE
//   [theta prod(theta + b_j - 1) - x prod(theta + a_i)] F = 0,  theta = x d/dx.
// On phi_s = e^x x^s the operator theta acts as phi_{s+1} + s phi_s.
class PfqAsymptotic {
  public:
    explicit PfqAsymptotic(const HypergeometricSpec& spec) : spec_(spec), nu_(spec.nu()) {
        c_.push_back(1.0);
    }

    double coeff(std::size_t k) {
        while (c_.size() <= k) next();
        return c_[k];
    }
    double nu() const { return nu_; }

  private:
    // expansion of prod(theta + roots) phi_s as coefficients of phi_{s+o}
    static std::vector<double> expand(const std::vector<double>& roots, double s) {
        std::vector<double> e{1.0};
        for (double c : roots) {
            std::vector<double> ne(e.size() + 1, 0.0);
            for (std::size_t o = 0; o < e.size(); ++o) {
                ne[o + 1] += e[o];
                ne[o] += e[o] * (s + static_cast<double>(o) + c);
            }
            e.swap(ne);
        }
        return e;
    }
    // d_j(s): coefficient of phi_{s+q+1-j} in L phi_s
    double d(std::size_t j, double s) const {
        const std::size_t q = spec_.lower.size();
        std::vector<double> proots{0.0};
        for (double b : spec_.lower) proots.push_back(b - 1.0);
        const auto pe = expand(proots, s);
        const auto qe = expand(spec_.upper, s);
        double v = 0.0;
        if (j <= q + 1) v += pe[q + 1 - j];
        if (j <= q && q - j < qe.size()) v -= qe[q - j];
        return v;
    }
    void next() {
        const std::size_t m = c_.size();
        const std::size_t q = spec_.lower.size();
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t j = m - k + 1;
            if (j > q + 1) continue;
            acc += c_[k] * d(j, nu_ - static_cast<double>(k));
        }
        c_.push_back(-acc / d(1, nu_ - static_cast<double>(m)));
    }

    HypergeometricSpec spec_;
    double nu_;
    std::vector<double> c_;
};

inline double log_gamma_ratio(const HypergeometricSpec& spec, double& sign) {
    double lg = 0.0;
    sign = 1.0;
    for (double b : spec.lower) {
        int s = 1;
        lg += ::lgamma_r(b, &s);
        sign *= s;
    }
    for (double a : spec.upper) {
        int s = 1;
        lg -= ::lgamma_r(a, &s);
        sign *= s;
    }
    return lg;
}

}  // namespace detail

// e^{-x} x^k pFq(x) by the scaled series (accumulated in log form).
inline double pfq_scaled_series(const HypergeometricSpec& spec, double x, double k,
                                const SeriesControl& ctl = pfq_control()) {
    if (x == 0.0) return k == 0.0 ? 1.0 : 0.0;
    const double lx = std::log(x);
    double log_term = -x + k * lx;
    double sign = 1.0;
    detail::LogSum pos, neg;
    pos.add(log_term);
    for (int n = 0;; ++n) {
        if (n >= ctl.max_terms) throw AccuracyError("pfq_scaled: term cap exceeded", pos.value() - neg.value());
        double r = x / (n + 1.0);
        for (double a : spec.upper) r *= a + n;
        for (double b : spec.lower) r /= b + n;
        if (r == 0.0) break;
        if (r < 0.0) sign = -sign;
        log_term += std::log(std::abs(r));
        (sign > 0 ? pos : neg).add(log_term);
        const double total_log = std::max(pos.log_scale, neg.log_scale);
        if (std::abs(r) < 1.0 && log_term < total_log + std::log(ctl.rel_tol * 0.1)) break;
    }
    return pos.value() - neg.value();
}

// Leading exponential asymptotic series of e^{-x} x^k pFq(x) for p == q.
inline double pfq_scaled_asymptotic(const HypergeometricSpec& spec, double x, double k,
                                    const SeriesControl& ctl = pfq_control()) {
    if (spec.upper.size() != spec.lower.size())
        throw DomainError("pfq_scaled_asymptotic: only p == q is supported");
    for (double a : spec.upper)
        if (a <= 0.0 && a == std::floor(a))
            throw DomainError("pfq_scaled_asymptotic: terminating series has no exponential part");
    detail::PfqAsymptotic asy(spec);
    double sign = 1.0;
    const double lg = detail::log_gamma_ratio(spec, sign);
    double sum = 1.0, prev_abs = 1.0;
    for (int j = 1; j < ctl.max_terms; ++j) {
        const double term = asy.coeff(static_cast<std::size_t>(j)) * std::pow(x, -j);
        if (std::abs(term) > prev_abs && j > 2) {
            if (prev_abs > 1e3 * ctl.rel_tol * std::abs(sum))
                throw AccuracyError("pfq_scaled: asymptotic series diverged before tolerance",
                                    sign * std::exp(lg + (k + asy.nu()) * std::log(x)) * sum);
            break;
        }
        sum += term;
        prev_abs = std::abs(term);
        if (prev_abs < ctl.rel_tol * std::abs(sum) * 0.1) break;
    }
    return sign * std::exp(lg + (k + asy.nu()) * std::log(x)) * sum;
}

// e^{-x} x^k pFq(x); bounded in x when k <= -nu (nu = sum a - sum b < 0).
inline double pfq_scaled(const HypergeometricSpec& spec, double x, double k,
                         const SeriesControl& ctl = pfq_control()) {
    spec.validate();
    detail::require_finite(x, "pfq_scaled");
    detail::require_finite(k, "pfq_scaled");
    if (x < 0.0) throw DomainError("pfq_scaled: x must be >= 0");
    if (k < 0.0) throw DomainError("pfq_scaled: k must be >= 0");
    if (spec.upper.size() == spec.lower.size() && k > -spec.nu() + 1e-12)
        throw DomainError("pfq_scaled: k exceeds -nu, no uniform bound");
    if (x < ctl.asymptotic_switch || spec.upper.size() != spec.lower.size())
        return pfq_scaled_series(spec, x, k, ctl);
    return pfq_scaled_asymptotic(spec, x, k, ctl);
}

// 1F1[1; a+1](z) = a e^z z^{-a} (Gamma(a) - Gamma(a, z)); returns the relative
// residual between the two sides. The lower incomplete gamma supplies the
// bracket directly so small z does not cancel.
inline double incomplete_gamma_pfq_residual(int a, double z) {
    if (a < 1) throw DomainError("incomplete_gamma_pfq_residual: a must be a positive integer");
    if (z < 0.0) throw DomainError("incomplete_gamma_pfq_residual: z must be >= 0");
    const double lhs = pfq({{1.0}, {a + 1.0}}, z);
    double rhs = 1.0;
    if (z > 0.0) rhs = a * std::exp(z - a * std::log(z)) * incomplete_gamma_lower(a, z);
    return std::abs(lhs - rhs) / std::abs(lhs);
}

}  // namespace kimura::specfun
