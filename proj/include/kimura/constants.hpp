#pragma once

// Constants fitted once by tools/fit_constants and frozen here. Each is the
// supremum of a scale-invariant ratio, rounded up in the 4th digit.

namespace kimura::constants {

// sup over zw >= t^2 of q0 / (z^{1/4} w^{-3/4} t^{-1/2} e^{-(sqrt z - sqrt w)^2 / t});
// approached as zw / t^2 -> inf, limit 1 / (2 sqrt(pi)) = 0.282094...
inline constexpr double gauss_refined_C = 0.2821;

// sup of sqrt(z s) * int q0^2(z, w, s) dw (0.227049...); interior maximum, the
// z / s -> inf limit is 1 / (2 sqrt(2 pi)) = 0.199471...
inline constexpr double energy_refined_C = 0.2271;

// sup of |q0(z1, w, s) - q0(z2, w, s)| s^{3/2} / |z1 - z2|^{1/2};
// attained as w, z2 -> 0 with z1 = s/2, value (2e)^{-1/2} = 0.428882...
inline constexpr double holder_M = 0.4289;

// One C for the K and K-tilde bounds, sup over beta in {1/4, 1/2, 3/4}. K-tilde
// dominates (K alone needs < 0.09); its sup sits in the limit t - tau << t at
// z = t - tau, values 0.3148, 0.4093, 0.5472 for the three betas.
inline constexpr double ratio_K_C = 0.5472;

// M_{beta,lambda} at beta = 1/2, lambda = 0.4: sup of Q_t / (t^eta |z1 - z2|^{lambda/2})
// over z in [2^-10, 4], t in [0.1, 1]. Scan max 0.3852 (t = 1, z1 = 1/16, z2 ~ 0.84).
inline constexpr double holder_Q_M = 0.39;

}  // namespace kimura::constants
