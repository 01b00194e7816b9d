#pragma once

// Local dependence: the four-quadrant bivariate probit likelihood in delta
// given fitted marginal indices, its analytic score and expected curvature,
// the delta optimizer, and the full grid estimator that assembles a BdrFit.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bdr/detail/parallel.hpp"
#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/marginal.hpp"
#include "bdr/model.hpp"

namespace bdr {

/// Probabilities of the four joint outcomes of (1(Y <= y), 1(W <= w)).
struct QuadrantCells {
    double p11 = 0.0;  // Y <= y, W <= w
    double p10 = 0.0;  // Y <= y, W >  w
    double p01 = 0.0;  // Y >  y, W <= w
    double p00 = 0.0;  // Y >  y, W >  w

    [[nodiscard]] double sum() const noexcept { return p11 + p10 + p01 + p00; }
};

inline QuadrantCells quadrant_cells(double a, double b, Correlation rho) {
    const Correlation neg = rho.negated();
    return {bivariate_normal_cdf(a, b, rho), bivariate_normal_cdf(a, -b, neg),
            bivariate_normal_cdf(-a, b, neg), bivariate_normal_cdf(-a, -b, rho)};
}

struct DeltaOptions {
    double tol_grad = 1e-8;
    int max_iter = 200;
    double cell_floor = 1e-10;
    bool exact_newton = false;  // Fisher scoring instead of BFGS
    double max_step = 5.0;      // sup-norm cap on a single step
};

enum class FitStatus { converged, boundary, failed };

inline const char* to_string(FitStatus s) {
    switch (s) {
        case FitStatus::converged: return "converged";
        case FitStatus::boundary: return "boundary";
        case FitStatus::failed: return "failed";
    }
    return "unknown";
}

/// ell^{yw}(delta) = E_n[w_i ell_i] for fixed marginal indices a_i, b_i.
/// The design matrix is held by reference and must outlive the objective.
class DeltaObjective {
public:
    DeltaObjective(Matrix&&, Vector, Vector, Eigen::ArrayXd, Eigen::ArrayXd, Vector = {},
                   double = 1e-10) = delete;
    DeltaObjective(const Matrix& x_delta, Vector a, Vector b, Eigen::ArrayXd below_y,
                   Eigen::ArrayXd below_w, Vector weights = {}, double cell_floor = 1e-10)
        : x_(x_delta),
          a_(std::move(a)),
          b_(std::move(b)),
          iy_(std::move(below_y)),
          jw_(std::move(below_w)),
          weights_(std::move(weights)),
          floor_(cell_floor) {
        const auto n = x_.rows();
        if (a_.size() != n || b_.size() != n || iy_.size() != n || jw_.size() != n) {
            throw ConfigError("delta objective: input lengths differ");
        }
        if (weights_.size() != 0 && weights_.size() != n) {
            throw ConfigError("delta objective: weight length mismatch");
        }
        if (!a_.allFinite() || !b_.allFinite()) {
            throw ConfigError("delta objective: marginal indices must be finite");
        }
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return x_.cols(); }
    [[nodiscard]] Eigen::Index rows() const noexcept { return x_.rows(); }
    [[nodiscard]] const Matrix& design() const noexcept { return x_; }
    [[nodiscard]] double weight(Eigen::Index i) const noexcept {
        return weights_.size() == 0 ? 1.0 : weights_(i);
    }

    /// Weighted totals per observed quadrant, ordered (11, 10, 01, 00).
    [[nodiscard]] std::array<double, 4> quadrant_weights() const {
        std::array<double, 4> out{};
        for (Eigen::Index i = 0; i < rows(); ++i) out[cell_of(i)] += weight(i);
        return out;
    }

    double evaluate(const Vector& delta, Vector* grad = nullptr) const {
        const Vector u = x_ * delta;
        const double inv_n = 1.0 / static_cast<double>(rows());
        double f = 0.0;
        if (grad) grad->setZero(dim());
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const double wi = weight(i);
            if (wi == 0.0) continue;
            const LinkValue link = link_eval(u(i));
            const bool ib = iy_(i) > 0.5;
            const bool jb = jw_(i) > 0.5;
            const bool concordant = ib == jb;
            const Correlation r = concordant ? link.g_of_u : link.g_of_u.negated();
            const double p = bivariate_normal_cdf(ib ? a_(i) : -a_(i), jb ? b_(i) : -b_(i), r);
            const double pf = std::max(p, floor_);
            f += wi * std::log(pf);
            // A floored cell is locally constant in delta.
            if (grad && p >= floor_) {
                const double dens = bivariate_normal_pdf(a_(i), b_(i), link.g_of_u);
                const double s = (concordant ? 1.0 : -1.0) * dens / pf * link.g_prime;
                grad->noalias() += (wi * s) * x_.row(i).transpose();
            }
        }
        if (grad) *grad *= inv_n;
        return f * inv_n;
    }

    [[nodiscard]] double value(const Vector& delta) const { return evaluate(delta); }
    [[nodiscard]] Vector gradient(const Vector& delta) const {
        Vector g;
        evaluate(delta, &g);
        return g;
    }

    /// Minus the expected delta-delta Hessian block:
    /// E_n[w (sum_c 1/p_c) phi2^2 g'^2 x x'].
    [[nodiscard]] Matrix expected_information(const Vector& delta) const {
        const Vector u = x_ * delta;
        Matrix info = Matrix::Zero(dim(), dim());
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const double wi = weight(i);
            if (wi == 0.0) continue;
            const LinkValue link = link_eval(u(i));
            const QuadrantCells c = quadrant_cells(a_(i), b_(i), link.g_of_u);
            const double inv_sum = 1.0 / std::max(c.p11, floor_) + 1.0 / std::max(c.p10, floor_) +
                                   1.0 / std::max(c.p01, floor_) + 1.0 / std::max(c.p00, floor_);
            const double d = bivariate_normal_pdf(a_(i), b_(i), link.g_of_u) * link.g_prime;
            info.noalias() += (wi * inv_sum * d * d) * x_.row(i).transpose() * x_.row(i);
        }
        return info / static_cast<double>(rows());
    }

private:
    [[nodiscard]] std::size_t cell_of(Eigen::Index i) const noexcept {
        const bool ib = iy_(i) > 0.5;
        const bool jb = jw_(i) > 0.5;
        return ib ? (jb ? 0 : 1) : (jb ? 2 : 3);
    }

    const Matrix& x_;
    Vector a_;
    Vector b_;
    Eigen::ArrayXd iy_;
    Eigen::ArrayXd jw_;
    Vector weights_;
    double floor_;
};

/// Average weighted quadrant log-likelihood (free-function form).
inline double joint_loglik(const Matrix& x_delta, const Vector& a, const Vector& b,
                           const Vector& delta, const Eigen::ArrayXd& below_y,
                           const Eigen::ArrayXd& below_w, const Vector& weights = {}) {
    return DeltaObjective(x_delta, a, b, below_y, below_w, weights).value(delta);
}

inline Vector score_delta(const Matrix& x_delta, const Vector& a, const Vector& b,
                          const Vector& delta, const Eigen::ArrayXd& below_y,
                          const Eigen::ArrayXd& below_w, const Vector& weights = {}) {
    return DeltaObjective(x_delta, a, b, below_y, below_w, weights).gradient(delta);
}

struct DeltaFit {
    Vector delta;
    FitStatus status = FitStatus::failed;
    int iterations = 0;
    double grad_norm = 0.0;
    double loglik = 0.0;
    std::string message;
};

namespace detail {

inline std::optional<Eigen::Index> intercept_column(const Matrix& x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if ((x.col(j).array() == 1.0).all()) return j;
    }
    return std::nullopt;
}

inline Matrix inverse_or_identity(const Matrix& info) {
    Eigen::LDLT<Matrix> ldlt(info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        const auto d = ldlt.vectorD();
        const double dmax = d.cwiseAbs().maxCoeff();
        if (dmax > 0.0 && d.minCoeff() > 1e-12 * dmax) {
            Matrix inv = ldlt.solve(Matrix::Identity(info.rows(), info.cols()));
            if (inv.allFinite()) return inv;
        }
    }
    return Matrix::Identity(info.rows(), info.cols());
}

}  // namespace detail

/// Maximizes a DeltaObjective.
///
/// Default is BFGS seeded with the inverse expected information at the start;
/// `exact_newton` switches to Fisher scoring. When both discordant (or both
/// concordant) quadrants carry no weight the supremum lies on the boundary, and
/// the intercept is set to the link saturation bound with status `boundary`.
inline DeltaFit maximize_delta(const DeltaObjective& obj, const Vector& start,
                               const DeltaOptions& opts = {}, const std::string& context = {}) {
    DeltaFit out;
    const auto q = obj.quadrant_weights();
    const bool no_discordant = q[1] == 0.0 && q[2] == 0.0;
    const bool no_concordant = q[0] == 0.0 && q[3] == 0.0;
    if (no_discordant || no_concordant) {
        const auto icpt = detail::intercept_column(obj.design());
        if (!icpt) {
            throw EstimationError(context + ": empty off-diagonal quadrants and no intercept in delta");
        }
        out.delta = Vector::Zero(obj.dim());
        out.delta(*icpt) = (no_discordant ? 1.0 : -1.0) * std::atanh(kRhoMax);
        out.status = FitStatus::boundary;
        out.loglik = obj.value(out.delta);
        out.message = no_discordant ? "no discordant observations; rho at +saturation"
                                    : "no concordant observations; rho at -saturation";
        return out;
    }

    Vector x = start.size() == obj.dim() ? start : Vector::Zero(obj.dim());
    Vector g;
    double f = obj.evaluate(x, &g);
    Matrix hinv = detail::inverse_or_identity(obj.expected_information(x));
    bool fresh_curvature = true;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        if (g.norm() <= opts.tol_grad) {
            out.status = FitStatus::converged;
            break;
        }
        if (opts.exact_newton && !fresh_curvature) {
            hinv = detail::inverse_or_identity(obj.expected_information(x));
            fresh_curvature = true;
        }
        Vector p = hinv * g;
        if (!(g.dot(p) > 0.0)) {
            hinv = detail::inverse_or_identity(obj.expected_information(x));
            fresh_curvature = true;
            p = hinv * g;
        }
        const double pmax = p.cwiseAbs().maxCoeff();
        if (pmax > opts.max_step) p *= opts.max_step / pmax;
        const double slope = g.dot(p);
        double t = 1.0;
        bool accepted = false;
        Vector x_new, g_new;
        double f_new = 0.0;
        while (t > 1e-14) {
            x_new = x + t * p;
            f_new = obj.evaluate(x_new, &g_new);
            if (detail::accept_step(f, f_new, t * slope, g.norm(), g_new.norm())) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            if (fresh_curvature) break;
            hinv = detail::inverse_or_identity(obj.expected_information(x));
            fresh_curvature = true;
            continue;
        }
        const Vector s = x_new - x;
        const Vector yv = g - g_new;  // change in the gradient of -f
        x = std::move(x_new);
        g = std::move(g_new);
        f = f_new;
        fresh_curvature = false;
        if (!opts.exact_newton) {
            const double sy = s.dot(yv);
            if (sy > 1e-12 * s.norm() * yv.norm()) {
                const double rho = 1.0 / sy;
                const Matrix eye = Matrix::Identity(s.size(), s.size());
                hinv = (eye - rho * s * yv.transpose()) * hinv * (eye - rho * yv * s.transpose()) +
                       rho * s * s.transpose();
            }
        }
    }
    if (iter == opts.max_iter && g.norm() <= opts.tol_grad) out.status = FitStatus::converged;
    if (out.status == FitStatus::converged && iter > 0) {
        // One Fisher-scoring polish, kept only if it shrinks the gradient. A
        // start that already meets the tolerance is returned unchanged.
        const Vector trial = x + detail::inverse_or_identity(obj.expected_information(x)) * g;
        Vector g_trial;
        const double f_trial = obj.evaluate(trial, &g_trial);
        if (std::isfinite(f_trial) && g_trial.norm() < g.norm()) {
            x = trial;
            g = g_trial;
            f = f_trial;
        }
    }
    out.delta = x;
    out.iterations = iter;
    out.grad_norm = g.norm();
    out.loglik = f;
    if (out.status != FitStatus::converged) {
        std::ostringstream msg;
        msg << context << ": delta did not converge after " << iter << " iterations (gradient norm "
            << g.norm() << ", last iterate [" << x.transpose() << "])";
        throw EstimationError(msg.str());
    }
    return out;
}

/// Columns of x that enter the dependence index; empty selects all.
inline Matrix select_columns(const Matrix& x, const std::vector<int>& cols) {
    if (cols.empty()) return x;
    Matrix out(x.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k] < 0 || cols[k] >= x.cols()) throw ConfigError("delta column out of range");
        out.col(static_cast<Eigen::Index>(k)) = x.col(cols[k]);
    }
    return out;
}

/// Two-step delta estimate at a body pair (y, w) holding the fitted marginal
/// indices x'mu_y and x'nu_w fixed.
inline DeltaFit fit_delta(const Sample& sample, const MarginalFit& mu_fit,
                          const MarginalFit& nu_fit, double y, double w,
                          const std::vector<int>& delta_columns = {}, const Vector& weights = {},
                          const Vector& warm_start = {}, const DeltaOptions& opts = {}) {
    const Matrix xd = select_columns(sample.x, delta_columns);
    DeltaObjective obj(xd, mu_fit.index_vector(y, sample.x), nu_fit.index_vector(w, sample.x),
                       detail::below_indicator(sample.y, y), detail::below_indicator(sample.w, w),
                       weights, opts.cell_floor);
    std::ostringstream ctx;
    ctx << "grid pair (" << y << ", " << w << ")";
    return maximize_delta(obj, warm_start, opts, ctx.str());
}

struct BdrConfig {
    ProbitOptions probit;
    DeltaOptions delta;
    std::vector<int> delta_columns;  // empty: every design column
    bool strict = false;             // abort on the first failed grid pair
    unsigned threads = 1;
};

struct GridPointStatus {
    FitStatus status = FitStatus::failed;
    int iterations = 0;
    double grad_norm = 0.0;
    std::string message;
};

/// A fitted bivariate distribution regression on one grid.
///
/// delta is stored for body pairs in row-major order (Y body index major);
/// every other grid pair reads the body pair nearest in each coordinate.
struct BdrFit {
    GridSpec grid;
    MarginalFit mu;
    MarginalFit nu;
    std::vector<int> delta_columns;
    std::size_t d_x = 0;
    std::vector<Vector> delta_body;
    std::vector<GridPointStatus> status;

    [[nodiscard]] std::size_t body_pair(std::size_t yb, std::size_t wb) const {
        return yb * grid.w.body_size() + wb;
    }

    [[nodiscard]] const Vector& delta_at(double y, double w) const {
        const std::size_t yb = grid.y.nearest_body_index(y) - grid.y.body_begin;
        const std::size_t wb = grid.w.nearest_body_index(w) - grid.w.body_begin;
        return delta_body[body_pair(yb, wb)];
    }

    [[nodiscard]] const Vector& delta_at_grid(std::size_t iy, std::size_t iw) const {
        return delta_at(grid.y.points.at(iy), grid.w.points.at(iw));
    }

    [[nodiscard]] const GridPointStatus& status_at(double y, double w) const {
        const std::size_t yb = grid.y.nearest_body_index(y) - grid.y.body_begin;
        const std::size_t wb = grid.w.nearest_body_index(w) - grid.w.body_begin;
        return status[body_pair(yb, wb)];
    }

    [[nodiscard]] Matrix x_delta(const Matrix& x) const { return select_columns(x, delta_columns); }

    /// Dependence index x'delta_{yw} for a full covariate row.
    template <typename Row>
    [[nodiscard]] double dependence_index(double y, double w, const Row& x) const {
        const Vector& d = delta_at(y, w);
        if (delta_columns.empty()) return x.dot(d);
        double u = 0.0;
        for (std::size_t k = 0; k < delta_columns.size(); ++k) {
            u += x(delta_columns[k]) * d(static_cast<Eigen::Index>(k));
        }
        return u;
    }

    [[nodiscard]] std::size_t count(FitStatus s) const {
        return static_cast<std::size_t>(
            std::count_if(status.begin(), status.end(), [s](const auto& p) { return p.status == s; }));
    }
};

namespace detail {

/// Shared driver for the base fit and weighted replicates. With `base`, the
/// marginals are refitted under `weights` (reusing base r0 values and warm
/// starts) while delta is re-estimated at the base marginal indices.
inline BdrFit fit_bdr_impl(const Sample& sample, const GridSpec& grid, const BdrConfig& config,
                           const Vector& weights, const BdrFit* base) {
    grid.y.check();
    grid.w.check();
    if (weights.size() != 0 && weights.size() != static_cast<Eigen::Index>(sample.size())) {
        throw ConfigError("fit_bdr: weight length mismatch");
    }
    BdrFit fit;
    fit.grid = grid;
    fit.d_x = sample.dim();
    fit.delta_columns = config.delta_columns;
    fit.mu = fit_marginal(sample, Outcome::y, grid, weights, config.probit,
                          base ? &base->mu : nullptr);
    fit.nu = fit_marginal(sample, Outcome::w, grid, weights, config.probit,
                          base ? &base->nu : nullptr);
    const MarginalFit& mu_idx = base ? base->mu : fit.mu;
    const MarginalFit& nu_idx = base ? base->nu : fit.nu;

    const Matrix xd = select_columns(sample.x, config.delta_columns);
    const auto ny = grid.y.body_size();
    const auto nw = grid.w.body_size();
    std::vector<Vector> b_index(nw);
    std::vector<Eigen::ArrayXd> j_ind(nw);
    for (std::size_t wb = 0; wb < nw; ++wb) {
        const double w = grid.w.body()[wb];
        b_index[wb] = nu_idx.index_vector(w, sample.x);
        j_ind[wb] = below_indicator(sample.w, w);
    }
    fit.delta_body.assign(ny * nw, Vector::Constant(xd.cols(), std::nan("")));
    fit.status.assign(ny * nw, GridPointStatus{});

    parallel_for(ny, config.threads, [&](std::size_t yb) {
        const double y = grid.y.body()[yb];
        const Vector a = mu_idx.index_vector(y, sample.x);
        const Eigen::ArrayXd i_ind = below_indicator(sample.y, y);
        Vector start;
        for (std::size_t wb = 0; wb < nw; ++wb) {
            const std::size_t idx = fit.body_pair(yb, wb);
            if (base) start = base->delta_body[idx];
            if (start.size() != 0 && !start.allFinite()) start = Vector();
            std::ostringstream ctx;
            ctx << "grid pair (" << y << ", " << grid.w.body()[wb] << ")";
            try {
                DeltaObjective obj(xd, a, b_index[wb], i_ind, j_ind[wb], weights,
                                   config.delta.cell_floor);
                DeltaFit df = maximize_delta(obj, start, config.delta, ctx.str());
                fit.status[idx] = {df.status, df.iterations, df.grad_norm, df.message};
                fit.delta_body[idx] = df.delta;
                start = df.status == FitStatus::converged ? df.delta : Vector();
            } catch (const EstimationError& e) {
                fit.status[idx] = {FitStatus::failed, 0, std::nan(""), e.what()};
                start = Vector();
                if (config.strict) throw;
            }
        }
    });
    return fit;
}

}  // namespace detail

/// Full estimator: marginal DR on both body grids, tail scales, delta on every
/// body pair, and nearest-body copying of delta to the rest of the grid.
inline BdrFit fit_bdr(const Sample& sample, const GridSpec& grid, const BdrConfig& config = {}) {
    return detail::fit_bdr_impl(sample, grid, config, Vector(), nullptr);
}

}  // namespace bdr
