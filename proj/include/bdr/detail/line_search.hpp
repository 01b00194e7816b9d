#pragma once

#include <cmath>
#include <limits>

namespace bdr::detail {

/// Step acceptance for maximization along an ascent direction.
///
/// Armijo sufficient increase with a rounding allowance. Near the optimum the
/// change in an averaged log-likelihood drops below its summation noise, so a
/// step that leaves f unchanged to within that noise is accepted when it
/// shrinks the gradient.
inline bool accept_step(double f, double f_new, double t_slope, double grad_norm,
                        double grad_norm_new) {
    if (!std::isfinite(f_new)) return false;
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    if (f_new >= f + 1e-4 * t_slope - noise / 8.0) return true;
    return std::abs(f_new - f) <= noise && grad_norm_new < grad_norm;
}

}  // namespace bdr::detail
