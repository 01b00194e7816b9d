#pragma once

// Standard normal primitives used by every likelihood in the library:
// univariate CDF/quantile/density, the bivariate normal CDF and density,
// the partial derivatives of the bivariate CDF, and the tanh correlation link.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bdr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Largest admissible |rho|; correlations are clamped to this bound.
inline constexpr double kRhoEpsilon = 1e-7;
inline constexpr double kRhoMax = 1.0 - kRhoEpsilon;

/// A correlation strictly inside (-1, 1).
///
/// Values in [-1, 1] are accepted and clamped to |rho| <= 1 - kRhoEpsilon;
/// `clamped()` reports whether that happened. NaN or |rho| > 1 throws
/// std::domain_error.
class Correlation {
public:
    constexpr Correlation() = default;

    explicit Correlation(double rho) {
        if (std::isnan(rho) || rho > 1.0 || rho < -1.0) {
            throw std::domain_error("correlation outside [-1, 1]: " + std::to_string(rho));
        }
        if (rho > kRhoMax) {
            rho_ = kRhoMax;
            clamped_ = true;
        } else if (rho < -kRhoMax) {
            rho_ = -kRhoMax;
            clamped_ = true;
        } else {
            rho_ = rho;
        }
    }

    [[nodiscard]] constexpr double value() const noexcept { return rho_; }
    [[nodiscard]] constexpr bool clamped() const noexcept { return clamped_; }
    [[nodiscard]] Correlation negated() const noexcept {
        Correlation c;
        c.rho_ = -rho_;
        c.clamped_ = clamped_;
        return c;
    }

private:
    double rho_ = 0.0;
    bool clamped_ = false;
};

/// Fisher link g(u) = tanh(u) evaluated at an index u, with g'(u) = 1 - g(u)^2.
struct LinkValue {
    double u = 0.0;
    Correlation g_of_u;
    double g_prime = 1.0;
};

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Phi(z) for any z including +-inf; no input checking.
inline double phi_cdf(double z) noexcept {
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

inline double phi_pdf(double z) noexcept {
    if (std::isinf(z)) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

// Gauss-Legendre half-abscissae and weights for 6, 12 and 20 points.
inline constexpr std::array<double, 3> kGl6X{0.9324695142031522, 0.6612093864662647,
                                             0.2386191860831970};
inline constexpr std::array<double, 3> kGl6W{0.1713244923791705, 0.3607615730481384,
                                             0.4679139345726904};
inline constexpr std::array<double, 6> kGl12X{0.9815606342467191, 0.9041172563704750,
                                              0.7699026741943050, 0.5873179542866171,
                                              0.3678314989981802, 0.1252334085114692};
inline constexpr std::array<double, 6> kGl12W{0.04717533638651177, 0.1069393259953183,
                                              0.1600783285433464,  0.2031674267230659,
                                              0.2334925365383547,  0.2491470458134029};
inline constexpr std::array<double, 10> kGl20X{
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733};
inline constexpr std::array<double, 10> kGl20W{
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};

template <std::size_t N>
double gl_asin_sum(const std::array<double, N>& xs, const std::array<double, N>& ws, double asr,
                   double hk, double hs) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (double sign : {-1.0, 1.0}) {
            const double sn = std::sin(asr * (1.0 + sign * xs[i]));
            sum += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
    }
    return sum;
}

template <std::size_t N>
double gl_high_rho_sum(const std::array<double, N>& xs, const std::array<double, N>& ws, double a,
                       double bs, double hk, double c, double d) noexcept {
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (double sign : {-1.0, 1.0}) {
            const double t = a * (1.0 + sign * xs[i]);
            const double xs2 = t * t;
            const double asr = -(bs / xs2 + hk) / 2.0;
            if (asr <= -100.0) continue;
            const double sp = 1.0 + c * xs2 * (1.0 + 5.0 * d * xs2);
            const double rs = std::sqrt(1.0 - xs2);
            const double ep = std::exp(-(hk / 2.0) * xs2 / ((1.0 + rs) * (1.0 + rs))) / rs;
            sum += ws[i] * std::exp(asr) * (sp - ep);
        }
    }
    return sum;
}

/// Upper-orthant probability P(X > h, Y > k) for a standard bivariate normal
/// with correlation r (Drezner-Wesolowsky / Genz quadrature over the
/// correlation path, with the reflection branch for |r| >= 0.925).
inline double bvn_upper(double h, double k, double r) noexcept {
    if (h == kInf || k == kInf) return 0.0;
    if (h == -kInf) return k == -kInf ? 1.0 : phi_cdf(-k);
    if (k == -kInf) return phi_cdf(-h);
    if (r == 0.0) return phi_cdf(-h) * phi_cdf(-k);

    double hk = h * k;
    double bvn = 0.0;
    const double ar = std::abs(r);
    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r) / 2.0;
        double sum;
        if (ar < 0.3) {
            sum = gl_asin_sum(kGl6X, kGl6W, asr, hk, hs);
        } else if (ar < 0.75) {
            sum = gl_asin_sum(kGl12X, kGl12W, asr, hk, hs);
        } else {
            sum = gl_asin_sum(kGl20X, kGl20W, asr, hk, hs);
        }
        bvn = sum * asr / kTwoPi + phi_cdf(-h) * phi_cdf(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (ar < 1.0) {
            const double as = 1.0 - r * r;
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double asr = -(bs / as + hk) / 2.0;
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 80.0;
            if (asr > -100.0) {
                bvn = a * std::exp(asr) *
                      (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            }
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(kTwoPi) * phi_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            bvn = (a * gl_high_rho_sum(kGl20X, kGl20W, a, bs, hk, c, d) - bvn) / kTwoPi;
        }
        if (r > 0.0) {
            bvn += phi_cdf(-std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double l = h < 0.0 ? phi_cdf(k) - phi_cdf(h) : phi_cdf(-h) - phi_cdf(-k);
            bvn = l - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

inline void require_not_nan(double v, const char* what) {
    if (std::isnan(v)) throw std::domain_error(std::string(what) + " is NaN");
}

}  // namespace detail

/// Standard normal CDF. Throws std::domain_error for non-finite input.
inline double std_normal_cdf(double z) {
    if (!std::isfinite(z)) throw std::domain_error("std_normal_cdf: non-finite argument");
    return detail::phi_cdf(z);
}

inline double std_normal_pdf(double z) {
    if (!std::isfinite(z)) throw std::domain_error("std_normal_pdf: non-finite argument");
    return detail::phi_pdf(z);
}

/// Inverse of std_normal_cdf on (0, 1).
///
/// Acklam's rational approximation followed by two Halley corrections against
/// the erfc-based CDF, which brings the round-trip error to a few ulps.
inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_quantile: p outside (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step; the residual is taken on the smaller tail to avoid cancellation.
    for (int iter = 0; iter < 2; ++iter) {
        const double e = x < 0.0 ? detail::phi_cdf(x) - p : (1.0 - p) - detail::phi_cdf(-x);
        const double u = e * std::sqrt(detail::kTwoPi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

/// Standard bivariate normal density with correlation rho.
inline double bivariate_normal_pdf(double a, double b, Correlation rho) {
    detail::require_not_nan(a, "bivariate_normal_pdf: a");
    detail::require_not_nan(b, "bivariate_normal_pdf: b");
    if (std::isinf(a) || std::isinf(b)) return 0.0;
    const double r = rho.value();
    const double om = 1.0 - r * r;
    return std::exp(-(a * a - 2.0 * r * a * b + b * b) / (2.0 * om)) /
           (detail::kTwoPi * std::sqrt(om));
}

/// P(X <= a, Y <= b) for a standard bivariate normal with correlation rho.
/// a and b may be +-infinity.
inline double bivariate_normal_cdf(double a, double b, Correlation rho) {
    detail::require_not_nan(a, "bivariate_normal_cdf: a");
    detail::require_not_nan(b, "bivariate_normal_cdf: b");
    if (a == -kInf || b == -kInf) return 0.0;
    if (a == kInf) return detail::phi_cdf(b);
    if (b == kInf) return detail::phi_cdf(a);
    return detail::bvn_upper(-a, -b, rho.value());
}

/// Partial derivatives of bivariate_normal_cdf with respect to a, b and rho.
struct CdfPartials {
    double d_a = 0.0;
    double d_b = 0.0;
    double d_rho = 0.0;
};

inline CdfPartials cdf_partials(double a, double b, Correlation rho) {
    detail::require_not_nan(a, "cdf_partials: a");
    detail::require_not_nan(b, "cdf_partials: b");
    const double r = rho.value();
    const double s = std::sqrt(1.0 - r * r);
    CdfPartials out;
    if (std::isfinite(a)) {
        const double z = std::isinf(b) ? b : (b - r * a) / s;
        out.d_a = detail::phi_pdf(a) * detail::phi_cdf(z);
    }
    if (std::isfinite(b)) {
        const double z = std::isinf(a) ? a : (a - r * b) / s;
        out.d_b = detail::phi_pdf(b) * detail::phi_cdf(z);
    }
    out.d_rho = bivariate_normal_pdf(a, b, rho);
    return out;
}

/// g(u) = tanh(u) with |g| clamped to kRhoMax, and g'(u) = 1 - g(u)^2.
inline LinkValue link_eval(double u) {
    detail::require_not_nan(u, "link_eval: u");
    LinkValue out;
    out.u = u;
    out.g_of_u = Correlation(std::tanh(u));
    const double g = out.g_of_u.value();
    out.g_prime = 1.0 - g * g;
    return out;
}

}  // namespace bdr
