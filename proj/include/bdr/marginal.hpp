#pragma once

// Probit distribution regression for each marginal on the body grid, the
// tail-scale estimates that extrapolate the index beyond the body, and the
// resulting index function r -> x'mu_r.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bdr/detail/line_search.hpp"
#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/model.hpp"

namespace bdr {

struct ProbitOptions {
    double tol_grad = 1e-8;
    int max_iter = 200;
    double prob_floor = 1e-10;
    double max_abs_coef = 1e4;  // larger coefficients are treated as separation
};

struct ProbitDiagnostics {
    int iterations = 0;
    double grad_norm = 0.0;
    double loglik = 0.0;
    bool converged = false;
};

struct ProbitResult {
    Vector coef;
    ProbitDiagnostics diag;
};

/// Weighted probit log-likelihood E_n[w_i (I_i log Phi(o_i + x_i'b) + (1-I_i) log Phi(-o_i - x_i'b))]
/// with an optional per-row offset o_i. Empty weights mean unit weights.
/// The design matrix is held by reference and must outlive the objective.
class ProbitObjective {
public:
    ProbitObjective(Matrix&&, Eigen::ArrayXd, Vector = {}, Vector = {}, double = 1e-10) = delete;
    ProbitObjective(const Matrix& x, Eigen::ArrayXd indicator, Vector weights = {},
                    Vector offset = {}, double prob_floor = 1e-10)
        : x_(x),
          indicator_(std::move(indicator)),
          weights_(std::move(weights)),
          offset_(std::move(offset)),
          floor_(prob_floor) {
        if (indicator_.size() != x_.rows()) throw ConfigError("probit: indicator length mismatch");
        if (weights_.size() != 0 && weights_.size() != x_.rows()) {
            throw ConfigError("probit: weight length mismatch");
        }
        if (offset_.size() != 0 && offset_.size() != x_.rows()) {
            throw ConfigError("probit: offset length mismatch");
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return x_.cols(); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return x_.rows(); }

    [[nodiscard]] double weight(Eigen::Index i) const noexcept {
        return weights_.size() == 0 ? 1.0 : weights_(i);
    }

    /// Weighted totals of observations with I = 1 and I = 0.
    [[nodiscard]] std::pair<double, double> side_weights() const {
        double below = 0.0, above = 0.0;
        for (Eigen::Index i = 0; i < rows(); ++i) {
            (indicator_(i) > 0.5 ? below : above) += weight(i);
        }
        return {below, above};
    }

    /// Objective value; gradient and expected information (minus the expected
    /// Hessian) are filled when the pointers are non-null.
    double evaluate(const Vector& coef, Vector* grad = nullptr, Matrix* info = nullptr) const {
        Vector index = x_ * coef;
        if (offset_.size() != 0) index += offset_;
        const double inv_n = 1.0 / static_cast<double>(rows());
        double f = 0.0;
        if (grad) grad->setZero(dim());
        if (info) info->setZero(dim(), dim());
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const double wi = weight(i);
            if (wi == 0.0) continue;
            const double z = index(i);
            const double raw_lo = detail::phi_cdf(z);
            const double raw_hi = detail::phi_cdf(-z);
            const double p_lo = std::clamp(raw_lo, floor_, 1.0 - floor_);
            const double p_hi = std::clamp(raw_hi, floor_, 1.0 - floor_);
            const bool below = indicator_(i) > 0.5;
            f += wi * std::log(below ? p_lo : p_hi);
            // A clamped probability is locally constant in the coefficients.
            const bool clamped = below ? p_lo != raw_lo : p_hi != raw_hi;
            if (grad || info) {
                const double dens = detail::phi_pdf(z);
                if (grad && !clamped) {
                    const double s = below ? dens / p_lo : -dens / p_hi;
                    grad->noalias() += (wi * s) * x_.row(i).transpose();
                }
                if (info) {
                    const double h = dens * dens / (p_lo * p_hi);
                    info->noalias() += (wi * h) * x_.row(i).transpose() * x_.row(i);
                }
            }
        }
        if (grad) *grad *= inv_n;
        if (info) *info *= inv_n;
        return f * inv_n;
    }

    [[nodiscard]] double value(const Vector& coef) const { return evaluate(coef); }

    /// True when x'coef (plus offset) puts every weighted observation strictly
    /// on its own side of zero; a maximizer with this property means the data
    /// are linearly separable and no finite MLE exists.
    [[nodiscard]] bool separates(const Vector& coef) const {
        Vector index = x_ * coef;
        if (offset_.size() != 0) index += offset_;
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (weight(i) == 0.0) continue;
            const bool below = indicator_(i) > 0.5;
            if (below ? !(index(i) > 0.0) : !(index(i) < 0.0)) return false;
        }
        return true;
    }

    [[nodiscard]] Vector gradient(const Vector& coef) const {
        Vector g;
        evaluate(coef, &g);
        return g;
    }
    [[nodiscard]] Matrix expected_information(const Vector& coef) const {
        Matrix h;
        evaluate(coef, nullptr, &h);
        return h;
    }

private:
    const Matrix& x_;
    Eigen::ArrayXd indicator_;
    Vector weights_;
    Vector offset_;
    double floor_;
};

namespace detail {

inline Eigen::ArrayXd below_indicator(const Vector& outcome, double threshold) {
    return (outcome.array() <= threshold).cast<double>();
}

/// Ascent direction info^{-1} g, or g itself if info is not positive definite.
inline Vector newton_direction(const Matrix& info, const Vector& grad) {
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const auto d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (dmax > 0.0 && d.minCoeff() > 1e-12 * dmax) {
            Vector step = ldlt.solve(grad);
            if (step.allFinite()) return step;
        }
    }
    return grad;
}

}  // namespace detail

/// Damped Fisher-scoring maximization of a ProbitObjective.
inline ProbitResult maximize_probit(const ProbitObjective& obj, const Vector& start,
                                    const ProbitOptions& opts, const std::string& context) {
    ProbitResult res;
    res.coef = start.size() == obj.dim() ? start : Vector::Zero(obj.dim());
    Vector grad;
    Matrix info;
    double f = obj.evaluate(res.coef, &grad, &info);
    int iter = 0;
    bool converged = false;
    for (; iter < opts.max_iter; ++iter) {
        if (grad.norm() <= opts.tol_grad) {
            converged = true;
            break;
        }
        const Vector step = detail::newton_direction(info, grad);
        const double slope = grad.dot(step);
        double t = 1.0;
        bool accepted = false;
        while (t > 1e-14) {
            Vector trial = res.coef + t * step;
            Vector g_trial;
            Matrix i_trial;
            const double f_trial = obj.evaluate(trial, &g_trial, &i_trial);
            if (detail::accept_step(f, f_trial, t * slope, grad.norm(), g_trial.norm())) {
                res.coef = std::move(trial);
                grad = std::move(g_trial);
                info = std::move(i_trial);
                f = f_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        if (res.coef.cwiseAbs().maxCoeff() > opts.max_abs_coef) {
            throw EstimationError(context + ": coefficients diverging (apparent separation)");
        }
    }
    if (converged && iter > 0) {
        // One polishing step, kept only if it shrinks the gradient further. A
        // start that already meets the tolerance is returned unchanged.
        const Vector trial = res.coef + detail::newton_direction(info, grad);
        Vector g_trial;
        const double f_trial = obj.evaluate(trial, &g_trial);
        if (std::isfinite(f_trial) && g_trial.norm() < grad.norm()) {
            res.coef = trial;
            grad = g_trial;
            f = f_trial;
        }
    }
    res.diag = {iter, grad.norm(), f, converged};
    if (!converged) {
        std::ostringstream msg;
        msg << context << ": probit did not converge after " << iter
            << " iterations (gradient norm " << grad.norm() << ")";
        throw EstimationError(msg.str());
    }
    return res;
}

/// Probit distribution regression of 1(outcome <= threshold) on x.
inline ProbitResult fit_probit_dr(const Sample& sample, Outcome which, double threshold,
                                  const Vector& weights = {}, const Vector& warm_start = {},
                                  const ProbitOptions& opts = {}) {
    const std::string context = "threshold " + std::to_string(threshold);
    ProbitObjective obj(sample.x, detail::below_indicator(sample.outcome(which), threshold),
                        weights, {}, opts.prob_floor);
    const auto [below, above] = obj.side_weights();
    if (!(below > 0.0) || !(above > 0.0)) {
        throw EstimationError(context + ": all observations on one side of the threshold");
    }
    auto res = maximize_probit(obj, warm_start, opts, context);
    if (obj.separates(res.coef)) {
        throw EstimationError(context + ": covariates separate the indicator (no finite MLE)");
    }
    return res;
}

enum class TailSide { lower, upper };

struct TailFit {
    double alpha = 1.0;
    double anchor = 0.0;
    double r0 = 0.0;
    ProbitDiagnostics diag;
};

namespace detail {

inline ProbitResult fit_alpha_at(const Sample& sample, Outcome which, double anchor,
                                 const Vector& coef_at_anchor, double r0, const Vector& weights,
                                 const ProbitOptions& opts) {
    const auto n = static_cast<Eigen::Index>(sample.size());
    const Matrix design = Matrix::Constant(n, 1, r0 - anchor);
    const Vector offset = sample.x * coef_at_anchor;
    ProbitObjective obj(design, below_indicator(sample.outcome(which), r0), weights, offset,
                        opts.prob_floor);
    return maximize_probit(obj, Vector::Zero(1), opts,
                           "tail scale at r0 = " + std::to_string(r0));
}

}  // namespace detail

/// Tail scale alpha for one side of the body.
///
/// r0 is the nearest observed value beyond `anchor` with at least m
/// observations strictly between anchor and r0 and at least m strictly beyond
/// r0; farther admissible values are tried while the estimate is not positive.
/// A supplied `fixed_r0` skips the search.
inline TailFit fit_tail_scale(const Sample& sample, Outcome which, double anchor,
                              const Vector& coef_at_anchor, TailSide side, const GridSpec& grid,
                              const Vector& weights = {}, std::optional<double> fixed_r0 = {},
                              const ProbitOptions& opts = {}) {
    const char* side_name = side == TailSide::upper ? "upper" : "lower";
    TailFit out;
    out.anchor = anchor;
    if (fixed_r0) {
        const auto res =
            detail::fit_alpha_at(sample, which, anchor, coef_at_anchor, *fixed_r0, weights, opts);
        if (!(res.coef(0) > 0.0)) {
            throw TailError(std::string(side_name) + " tail: alpha not positive at r0 = " +
                            std::to_string(*fixed_r0));
        }
        out.alpha = res.coef(0);
        out.r0 = *fixed_r0;
        out.diag = res.diag;
        return out;
    }

    const Vector& values = sample.outcome(which);
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    if (side == TailSide::lower) {
        // Mirror so that "beyond" always means larger.
        for (double& v : sorted) v = -v;
        std::reverse(sorted.begin(), sorted.end());
    }
    const double a = side == TailSide::upper ? anchor : -anchor;
    const auto m = static_cast<std::ptrdiff_t>(grid.tail_min_obs);
    const auto first = std::upper_bound(sorted.begin(), sorted.end(), a);
    bool admissible_seen = false;
    for (auto it = first; it != sorted.end();) {
        const double v = *it;
        const auto between = it - first;
        const auto next = std::upper_bound(it, sorted.end(), v);
        const auto beyond = sorted.end() - next;
        it = next;
        if (beyond < m) break;
        if (between < m) continue;
        admissible_seen = true;
        const double r0 = side == TailSide::upper ? v : -v;
        const auto res =
            detail::fit_alpha_at(sample, which, anchor, coef_at_anchor, r0, weights, opts);
        if (res.coef(0) > 0.0) {
            out.alpha = res.coef(0);
            out.r0 = r0;
            out.diag = res.diag;
            return out;
        }
    }
    if (!admissible_seen) {
        throw TailError(std::string(side_name) + " tail: no admissible r0 with " +
                        std::to_string(m) +
                        " observations on each side; widen the body grid or reduce m");
    }
    throw TailError(std::string(side_name) +
                    " tail: estimated scale is not positive at every admissible r0");
}

/// Body coefficients and tail scales for one outcome.
struct MarginalFit {
    Outcome outcome = Outcome::y;
    std::vector<double> body_points;
    std::vector<Vector> coef;
    std::vector<ProbitDiagnostics> diagnostics;
    TailFit lower;
    TailFit upper;

    [[nodiscard]] double anchor_lo() const { return body_points.front(); }
    [[nodiscard]] double anchor_hi() const { return body_points.back(); }
    [[nodiscard]] Eigen::Index dim() const { return coef.front().size(); }

    /// Coefficient vector mu_r. Inside the body, grid points return their own
    /// estimate and points between two grid values interpolate linearly.
    /// Outside, the intercept moves by (r - anchor) * alpha of that side.
    [[nodiscard]] Vector coef_at(double r) const {
        if (!std::isfinite(r)) throw std::domain_error("coef_at: r must be finite");
        if (r < anchor_lo()) {
            Vector c = coef.front();
            c(0) += (r - anchor_lo()) * lower.alpha;
            return c;
        }
        if (r > anchor_hi()) {
            Vector c = coef.back();
            c(0) += (r - anchor_hi()) * upper.alpha;
            return c;
        }
        const auto hi = std::lower_bound(body_points.begin(), body_points.end(), r);
        const auto hi_idx = static_cast<std::size_t>(hi - body_points.begin());
        if (body_points[hi_idx] == r) return coef[hi_idx];
        const std::size_t lo_idx = hi_idx - 1;
        const double t =
            (r - body_points[lo_idx]) / (body_points[hi_idx] - body_points[lo_idx]);
        return (1.0 - t) * coef[lo_idx] + t * coef[hi_idx];
    }

    /// x'mu_r, with r = -inf / +inf mapping to -inf / +inf.
    template <typename Row>
    [[nodiscard]] double index(double r, const Row& x) const {
        if (r == -kInf) return -kInf;
        if (r == kInf) return kInf;
        return x.dot(coef_at(r));
    }

    [[nodiscard]] Vector index_vector(double r, const Matrix& x) const {
        if (r == -kInf) return Vector::Constant(x.rows(), -kInf);
        if (r == kInf) return Vector::Constant(x.rows(), kInf);
        return x * coef_at(r);
    }
};

/// Distribution regression over the body grid of one outcome (warm-started
/// across adjacent grid points) followed by both tail scales.
///
/// When `base` is given its coefficients seed the optimizer and its r0 values
/// are reused, which is how bootstrap replicates are fitted.
inline MarginalFit fit_marginal(const Sample& sample, Outcome which, const GridSpec& grid,
                                const Vector& weights = {}, const ProbitOptions& opts = {},
                                const MarginalFit* base = nullptr) {
    const OutcomeGrid& g = grid.outcome(which);
    MarginalFit fit;
    fit.outcome = which;
    fit.body_points.assign(g.body().begin(), g.body().end());
    Vector start;
    for (std::size_t b = 0; b < fit.body_points.size(); ++b) {
        const double r = fit.body_points[b];
        if (base) start = base->coef.at(b);
        try {
            auto res = fit_probit_dr(sample, which, r, weights, start, opts);
            start = res.coef;
            fit.coef.push_back(std::move(res.coef));
            fit.diagnostics.push_back(res.diag);
        } catch (const EstimationError& e) {
            throw EstimationError(std::string(which == Outcome::y ? "Y" : "W") +
                                  " body point " + std::to_string(b) + ": " + e.what());
        }
    }
    const auto with_outcome = [&](auto&& f) {
        try {
            return f();
        } catch (const TailError& e) {
            throw TailError(std::string(which == Outcome::y ? "Y " : "W ") + e.what());
        }
    };
    fit.lower = with_outcome([&] {
        return fit_tail_scale(sample, which, fit.anchor_lo(), fit.coef.front(), TailSide::lower,
                              grid, weights,
                              base ? std::optional<double>(base->lower.r0) : std::nullopt, opts);
    });
    fit.upper = with_outcome([&] {
        return fit_tail_scale(sample, which, fit.anchor_hi(), fit.coef.back(), TailSide::upper,
                              grid, weights,
                              base ? std::optional<double>(base->upper.r0) : std::nullopt, opts);
    });
    return fit;
}

/// x'mu_r of a fitted marginal.
template <typename Row>
double marginal_index(const MarginalFit& fit, double r, const Row& x) {
    return fit.index(r, x);
}

}  // namespace bdr
