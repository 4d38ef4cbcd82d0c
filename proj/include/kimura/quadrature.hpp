#pragma once

// Fixed Gauss-Legendre panels and adaptive Gauss-Kronrod wrappers.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kimura/errors.hpp"

namespace kimura::quad {

struct Rule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

namespace detail {
template <unsigned N>
Rule make_rule() {
    using G = boost::math::quadrature::gauss<double, N>;
    Rule r;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] == 0.0) continue;
        r.x.push_back(-a[i]);
        r.w.push_back(w[i]);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        r.x.push_back(a[i]);
        r.w.push_back(w[i]);
    }
    return r;
}
}  // namespace detail

// Gauss-Legendre rule with n points; n must be one of 4, 6, 8, 10, 12, 16, 20, 24, 32.
inline const Rule& gauss_legendre(int n) {
    static const Rule r4 = detail::make_rule<4>(), r6 = detail::make_rule<6>(), r8 = detail::make_rule<8>(),
                      r10 = detail::make_rule<10>(), r12 = detail::make_rule<12>(), r16 = detail::make_rule<16>(),
                      r20 = detail::make_rule<20>(), r24 = detail::make_rule<24>(), r32 = detail::make_rule<32>();
    switch (n) {
        case 4: return r4;
        case 6: return r6;
        case 8: return r8;
        case 10: return r10;
        case 12: return r12;
        case 16: return r16;
        case 20: return r20;
        case 24: return r24;
        case 32: return r32;
        default: throw DomainError("gauss_legendre: unsupported point count " + std::to_string(n));
    }
}

// Nodes and weights of a composite rule over the given breakpoints.
struct Nodes {
    std::vector<double> x, w;
    void append_panel(double a, double b, const Rule& r) {
        const double h = 0.5 * (b - a), c = 0.5 * (b + a);
        for (std::size_t i = 0; i < r.x.size(); ++i) {
            x.push_back(c + h * r.x[i]);
            w.push_back(h * r.w[i]);
        }
    }
};

inline Nodes composite(const std::vector<double>& breaks, int n) {
    Nodes out;
    const Rule& r = gauss_legendre(n);
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (breaks[i + 1] > breaks[i]) out.append_panel(breaks[i], breaks[i + 1], r);
    return out;
}

// Panels on [0, L] graded toward 0: breaks L (k/m)^g, k = 0..m.
inline std::vector<double> graded_breaks(double L, int m, double g) {
    std::vector<double> b(m + 1);
    for (int k = 0; k <= m; ++k) b[k] = L * std::pow(static_cast<double>(k) / m, g);
    return b;
}

// Geometric ladder on [0, L]: 0, L r^{m-1}, ..., L r, L with ratio r < 1.
inline std::vector<double> geometric_breaks(double L, int m, double r) {
    std::vector<double> b;
    b.push_back(0.0);
    for (int k = m - 1; k >= 0; --k) b.push_back(L * std::pow(r, k));
    return b;
}

struct Result {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive 15-point Gauss-Kronrod on [a, b] with relative tolerance.
template <class F>
Result adaptive(F&& f, double a, double b, double rel_tol, unsigned max_depth = 18) {
    Result r;
    if (b <= a) return r;
    double l1 = 0.0;
    r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol, &r.error, &l1);
    return r;
}

// Adaptive integration over consecutive panels; breakpoints help localize peaks.
template <class F>
Result adaptive_panels(F&& f, const std::vector<double>& breaks, double rel_tol, unsigned max_depth = 18) {
    Result total;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        Result r = adaptive(f, breaks[i], breaks[i + 1], rel_tol, max_depth);
        total.value += r.value;
        total.error += r.error;
    }
    return total;
}

}  // namespace kimura::quad
