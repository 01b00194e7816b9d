#pragma once

// Functionals of fitted BDR models: conditional and counterfactual joint CDFs,
// the composition / sorting / marginals decomposition, transition matrices and
// their decomposition, and the zero-correlation counterfactual.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bdr/dependence.hpp"
#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/model.hpp"

namespace bdr {

inline constexpr double kShareFloor = 1e-3;

/// Phi2(x'mu_y, x'nu_w; g(x'delta_yw)) with mu, nu and delta each taken from
/// its own fit. Indices outside the body use the tail extrapolation of the
/// supplying fit; delta uses its nearest body pair.
template <typename Row>
double conditional_joint_cdf(const BdrFit& mu_src, const BdrFit& nu_src, const BdrFit& delta_src,
                             double y, double w, const Row& x) {
    const double a = mu_src.mu.index(y, x);
    const double b = nu_src.nu.index(w, x);
    if (a == -kInf || b == -kInf) return 0.0;
    if (!delta_src.delta_at(y, w).allFinite()) return std::numeric_limits<double>::quiet_NaN();
    const LinkValue link = link_eval(delta_src.dependence_index(y, w, x));
    return bivariate_normal_cdf(a, b, link.g_of_u);
}

template <typename Row>
double conditional_joint_cdf(const BdrFit& fit, double y, double w, const Row& x) {
    return conditional_joint_cdf(fit, fit, fit, y, w, x);
}

/// Joint CDF values on a (y, w) point set.
struct JointCdfSurface {
    std::vector<double> y_points;
    std::vector<double> w_points;
    Matrix values;  // rows: y_points, cols: w_points
    CounterfactualIndex index;
    bool independence = false;  // rho forced to zero

    [[nodiscard]] double at(std::size_t iy, std::size_t iw) const {
        return values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(iw));
    }
};

namespace detail {

inline void require_groups(std::span<const BdrFit> fits, std::span<const Sample> samples,
                           const CounterfactualIndex& idx) {
    for (int g : {idx.j, idx.k, idx.l}) {
        if (g < 0 || static_cast<std::size_t>(g) >= fits.size()) {
            throw ConfigError("counterfactual " + idx.str() + ": group " + std::to_string(g) +
                              " has no fit");
        }
    }
    if (idx.m < 0 || static_cast<std::size_t>(idx.m) >= samples.size()) {
        throw ConfigError("counterfactual " + idx.str() + ": group " + std::to_string(idx.m) +
                          " has no sample");
    }
    if (samples[static_cast<std::size_t>(idx.m)].size() == 0) {
        throw ConfigError("counterfactual " + idx.str() + ": covariate sample is empty");
    }
    const std::size_t dx = samples[static_cast<std::size_t>(idx.m)].dim();
    for (int g : {idx.j, idx.k, idx.l}) {
        if (fits[static_cast<std::size_t>(g)].d_x != dx) {
            throw ConfigError("counterfactual " + idx.str() + ": covariate dimensions differ");
        }
    }
}

}  // namespace detail

/// Plug-in counterfactual CDF F^{(j,k,l,m)}: the (optionally weighted) average
/// of Phi2(X'mu^j_y, X'nu^k_w; g(X'delta^l_yw)) over the covariate rows of
/// group m. `covariate_weights` is empty for equal weights.
inline JointCdfSurface counterfactual_joint_cdf(std::span<const BdrFit> fits,
                                                std::span<const Sample> samples,
                                                const CounterfactualIndex& index,
                                                std::span<const double> y_points,
                                                std::span<const double> w_points,
                                                const Vector& covariate_weights = {},
                                                bool independence = false) {
    detail::require_groups(fits, samples, index);
    const BdrFit& fj = fits[static_cast<std::size_t>(index.j)];
    const BdrFit& fk = fits[static_cast<std::size_t>(index.k)];
    const BdrFit& fl = fits[static_cast<std::size_t>(index.l)];
    const Matrix& x = samples[static_cast<std::size_t>(index.m)].x;
    const auto n = x.rows();
    if (covariate_weights.size() != 0 && covariate_weights.size() != n) {
        throw ConfigError("counterfactual: covariate weight length mismatch");
    }
    const double total_weight =
        covariate_weights.size() == 0 ? static_cast<double>(n) : covariate_weights.sum();
    if (!(total_weight > 0.0)) throw ConfigError("counterfactual: covariate weights sum to zero");

    JointCdfSurface out;
    out.y_points.assign(y_points.begin(), y_points.end());
    out.w_points.assign(w_points.begin(), w_points.end());
    out.index = index;
    out.independence = independence;
    out.values.resize(static_cast<Eigen::Index>(y_points.size()),
                      static_cast<Eigen::Index>(w_points.size()));

    std::vector<Vector> b(w_points.size());
    for (std::size_t iw = 0; iw < w_points.size(); ++iw) b[iw] = fk.nu.index_vector(w_points[iw], x);
    const Matrix xd = fl.x_delta(x);
    for (std::size_t iy = 0; iy < y_points.size(); ++iy) {
        const double y = y_points[iy];
        const Vector a = fj.mu.index_vector(y, x);
        for (std::size_t iw = 0; iw < w_points.size(); ++iw) {
            const double w = w_points[iw];
            Vector u;
            if (!independence) {
                const Vector& d = fl.delta_at(y, w);
                if (!d.allFinite()) {
                    // failed grid pair in the supplying fit
                    out.values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(iw)) =
                        std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                u = xd * d;
            }
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double wi = covariate_weights.size() == 0 ? 1.0 : covariate_weights(i);
                if (wi == 0.0) continue;
                double p;
                if (independence) {
                    p = detail::phi_cdf(a(i)) * detail::phi_cdf(b[iw](i));
                } else if (a(i) == -kInf || b[iw](i) == -kInf) {
                    p = 0.0;
                } else {
                    p = bivariate_normal_cdf(a(i), b[iw](i), link_eval(u(i)).g_of_u);
                }
                acc += wi * p;
            }
            out.values(static_cast<Eigen::Index>(iy), static_cast<Eigen::Index>(iw)) =
                acc / total_weight;
        }
    }
    return out;
}

/// Surface of the zero-correlation counterfactual: the covariate average of
/// Phi(x'mu_y) Phi(x'nu_w).
inline JointCdfSurface independence_counterfactual(const BdrFit& fit, const Sample& sample,
                                                   std::span<const double> y_points,
                                                   std::span<const double> w_points,
                                                   const Vector& covariate_weights = {}) {
    return counterfactual_joint_cdf(std::span<const BdrFit>(&fit, 1),
                                    std::span<const Sample>(&sample, 1), CounterfactualIndex{},
                                    y_points, w_points, covariate_weights, true);
}

/// Total = composition + sorting + marginal_w + marginal_y, entrywise.
struct DecompositionReport {
    Matrix total;
    Matrix composition;
    Matrix sorting;
    Matrix marginal_w;
    Matrix marginal_y;

    [[nodiscard]] Matrix residual() const {
        return total - (composition + sorting + marginal_w + marginal_y);
    }

    /// Component divided by the total where |total| > floor, NaN elsewhere.
    [[nodiscard]] static Matrix share(const Matrix& component, const Matrix& total,
                                      double floor = kShareFloor) {
        Matrix out(component.rows(), component.cols());
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            for (Eigen::Index k = 0; k < out.cols(); ++k) {
                out(i, k) = std::abs(total(i, k)) > floor
                                ? component(i, k) / total(i, k)
                                : std::numeric_limits<double>::quiet_NaN();
            }
        }
        return out;
    }

    /// Builds the report from the five surfaces F1111, F1110, F1100, F1000, F0000.
    static DecompositionReport from_chain(const Matrix& f1111, const Matrix& f1110,
                                          const Matrix& f1100, const Matrix& f1000,
                                          const Matrix& f0000) {
        return {f1111 - f0000, f1111 - f1110, f1110 - f1100, f1100 - f1000, f1000 - f0000};
    }
};

/// The five counterfactual indices of the decomposition chain, in order.
inline constexpr std::array<CounterfactualIndex, 5> kDecompositionChain{{
    {1, 1, 1, 1}, {1, 1, 1, 0}, {1, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0, 0}}};

/// Per-group covariate weights; an empty span (or empty entries) means equal weights.
using GroupWeights = std::span<const Vector>;

namespace detail {

inline const Vector& group_weight(GroupWeights weights, int m) {
    static const Vector empty;
    if (weights.empty()) return empty;
    return weights[static_cast<std::size_t>(m)];
}

inline std::array<JointCdfSurface, 5> chain_surfaces(std::span<const BdrFit> fits,
                                                     std::span<const Sample> samples,
                                                     std::span<const double> y_points,
                                                     std::span<const double> w_points,
                                                     GroupWeights weights) {
    if (fits.size() != 2 || samples.size() != 2) {
        throw ConfigError("decomposition needs fits and samples for groups 0 and 1");
    }
    std::array<JointCdfSurface, 5> out;
    for (std::size_t c = 0; c < 5; ++c) {
        const auto& idx = kDecompositionChain[c];
        out[c] = counterfactual_joint_cdf(fits, samples, idx, y_points, w_points,
                                          group_weight(weights, idx.m));
    }
    return out;
}

}  // namespace detail

/// Decomposition of F^{(1111)} - F^{(0000)} on a (y, w) point set.
inline DecompositionReport decompose_joint(std::span<const BdrFit> fits,
                                           std::span<const Sample> samples,
                                           std::span<const double> y_points,
                                           std::span<const double> w_points,
                                           GroupWeights weights = {}) {
    const auto s = detail::chain_surfaces(fits, samples, y_points, w_points, weights);
    return DecompositionReport::from_chain(s[0].values, s[1].values, s[2].values, s[3].values,
                                           s[4].values);
}

/// Bracket probabilities between consecutive cuts.
struct TransitionMatrixT {
    Matrix cells;  // J x K
    std::vector<double> y_cuts;
    std::vector<double> w_cuts;

    [[nodiscard]] double min_cell() const { return cells.minCoeff(); }
    [[nodiscard]] double total() const { return cells.sum(); }
};

namespace detail {

inline void check_cuts(std::span<const double> cuts, const char* name) {
    if (cuts.size() < 2) throw ConfigError(std::string(name) + " cuts: need at least -inf and +inf");
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (!(cuts[i] > cuts[i - 1])) {
            throw ValidationError(std::string(name) + " cuts must be strictly increasing");
        }
    }
    if (cuts.front() != -kInf || cuts.back() != kInf) {
        throw ValidationError(std::string(name) + " cuts must start at -inf and end at +inf");
    }
}

}  // namespace detail

/// Four-corner inclusion-exclusion of a CDF surface evaluated at the cuts.
inline TransitionMatrixT transition_matrix(const JointCdfSurface& surface) {
    detail::check_cuts(surface.y_points, "y");
    detail::check_cuts(surface.w_points, "w");
    TransitionMatrixT t;
    t.y_cuts = surface.y_points;
    t.w_cuts = surface.w_points;
    const auto nj = static_cast<Eigen::Index>(t.y_cuts.size() - 1);
    const auto nk = static_cast<Eigen::Index>(t.w_cuts.size() - 1);
    const Matrix& f = surface.values;
    t.cells.resize(nj, nk);
    for (Eigen::Index j = 1; j <= nj; ++j) {
        for (Eigen::Index k = 1; k <= nk; ++k) {
            t.cells(j - 1, k - 1) = f(j, k) - f(j - 1, k) - f(j, k - 1) + f(j - 1, k - 1);
        }
    }
    return t;
}

/// Transition matrix of any joint CDF F(y, w).
inline TransitionMatrixT transition_matrix(const std::function<double(double, double)>& cdf,
                                           std::span<const double> y_cuts,
                                           std::span<const double> w_cuts) {
    JointCdfSurface s;
    s.y_points.assign(y_cuts.begin(), y_cuts.end());
    s.w_points.assign(w_cuts.begin(), w_cuts.end());
    detail::check_cuts(s.y_points, "y");
    detail::check_cuts(s.w_points, "w");
    s.values.resize(static_cast<Eigen::Index>(y_cuts.size()),
                    static_cast<Eigen::Index>(w_cuts.size()));
    for (std::size_t i = 0; i < y_cuts.size(); ++i) {
        for (std::size_t k = 0; k < w_cuts.size(); ++k) {
            s.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                cdf(y_cuts[i], w_cuts[k]);
        }
    }
    return transition_matrix(s);
}

/// Decomposition of T^{(1111)} - T^{(0000)} over the cut grid.
inline DecompositionReport decompose_transition(std::span<const BdrFit> fits,
                                                std::span<const Sample> samples,
                                                std::span<const double> y_cuts,
                                                std::span<const double> w_cuts,
                                                GroupWeights weights = {}) {
    detail::check_cuts(y_cuts, "y");
    detail::check_cuts(w_cuts, "w");
    const auto s = detail::chain_surfaces(fits, samples, y_cuts, w_cuts, weights);
    std::array<Matrix, 5> t;
    for (std::size_t c = 0; c < 5; ++c) t[c] = transition_matrix(s[c]).cells;
    return DecompositionReport::from_chain(t[0], t[1], t[2], t[3], t[4]);
}

}  // namespace bdr
