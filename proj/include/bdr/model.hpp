#pragma once

// Data model shared by the estimators: samples, evaluation grids, the
// nearest-body-point rule, and the counterfactual index.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"

namespace bdr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Outcome { y, w };

/// Observations (Y_i, W_i, X_i) with an optional binary group label.
///
/// The first column of `x` is the intercept. `group` is either empty or has
/// one label in {0, 1} per row.
struct Sample {
    Vector y;
    Vector w;
    Matrix x;
    std::vector<int> group;
    std::vector<std::string> covariate_names;  // one per column of x; may be empty

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(y.size()); }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(x.cols()); }
    [[nodiscard]] bool has_groups() const noexcept { return !group.empty(); }

    [[nodiscard]] const Vector& outcome(Outcome which) const noexcept {
        return which == Outcome::y ? y : w;
    }

    /// Rows with the given group label, without the label column.
    [[nodiscard]] Sample subset(int label) const {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < group.size(); ++i) {
            if (group[i] == label) rows.push_back(static_cast<Eigen::Index>(i));
        }
        Sample out;
        out.y.resize(static_cast<Eigen::Index>(rows.size()));
        out.w.resize(out.y.size());
        out.x.resize(out.y.size(), x.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = rows[r];
            const auto ri = static_cast<Eigen::Index>(r);
            out.y(ri) = y(i);
            out.w(ri) = w(i);
            out.x.row(ri) = x.row(i);
        }
        out.covariate_names = covariate_names;
        return out;
    }
};

/// Checks the Sample invariants and returns the sample unchanged.
///
/// Throws ValidationError on length mismatches, non-finite entries (naming the
/// row), a first column that is not identically one, n < d_x + 1, a
/// rank-deficient design, or group labels outside {0, 1} / an empty group.
inline Sample validate(Sample sample) {
    const auto n = sample.y.size();
    if (sample.w.size() != n || sample.x.rows() != n) {
        throw ValidationError("sample: y, w and x have different numbers of rows");
    }
    const auto dx = sample.x.cols();
    if (dx < 1) throw ValidationError("sample: design matrix has no columns");
    if (n < dx + 1) {
        throw ValidationError("sample: need at least d_x + 1 = " + std::to_string(dx + 1) +
                              " observations, got " + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(sample.y(i)) || !std::isfinite(sample.w(i))) {
            throw ValidationError("sample: non-finite outcome in row " + std::to_string(i));
        }
        for (Eigen::Index j = 0; j < dx; ++j) {
            if (!std::isfinite(sample.x(i, j))) {
                throw ValidationError("sample: non-finite covariate in row " + std::to_string(i) +
                                      ", column " + std::to_string(j));
            }
        }
        if (sample.x(i, 0) != 1.0) {
            throw ValidationError("sample: first design column must be the intercept (row " +
                                  std::to_string(i) + ")");
        }
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(sample.x);
    qr.setThreshold(1e-10);
    if (qr.rank() < dx) {
        throw ValidationError("sample: design matrix is rank deficient (rank " +
                              std::to_string(qr.rank()) + " < " + std::to_string(dx) + ")");
    }
    if (sample.has_groups()) {
        if (sample.group.size() != static_cast<std::size_t>(n)) {
            throw ValidationError("sample: group labels do not match the number of rows");
        }
        std::size_t count[2] = {0, 0};
        for (std::size_t i = 0; i < sample.group.size(); ++i) {
            const int g = sample.group[i];
            if (g != 0 && g != 1) {
                throw ValidationError("sample: group label in row " + std::to_string(i) +
                                      " is not 0 or 1");
            }
            ++count[g];
        }
        if (count[0] == 0 || count[1] == 0) throw ValidationError("sample: a group is empty");
    }
    return sample;
}

/// Thresholds for one outcome and the contiguous body range [body_begin, body_end).
struct OutcomeGrid {
    std::vector<double> points;
    std::vector<double> levels;  // probability level of each point (NaN if user supplied)
    std::size_t body_begin = 0;
    std::size_t body_end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
    [[nodiscard]] std::size_t body_size() const noexcept { return body_end - body_begin; }
    [[nodiscard]] bool in_body(std::size_t idx) const noexcept {
        return idx >= body_begin && idx < body_end;
    }
    [[nodiscard]] std::span<const double> body() const noexcept {
        return std::span<const double>(points).subspan(body_begin, body_size());
    }
    [[nodiscard]] double body_min() const { return points[body_begin]; }
    [[nodiscard]] double body_max() const { return points[body_end - 1]; }

    /// Index (into `points`) of the body point closest to r; ties go to the smaller value.
    [[nodiscard]] std::size_t nearest_body_index(double r) const {
        if (r <= body_min()) return body_begin;
        if (r >= body_max()) return body_end - 1;
        const auto first = points.begin() + static_cast<std::ptrdiff_t>(body_begin);
        const auto last = points.begin() + static_cast<std::ptrdiff_t>(body_end);
        const auto hi = std::lower_bound(first, last, r);
        const auto hi_idx = static_cast<std::size_t>(hi - points.begin());
        if (points[hi_idx] == r) return hi_idx;
        const std::size_t lo_idx = hi_idx - 1;
        return (r - points[lo_idx] <= points[hi_idx] - r) ? lo_idx : hi_idx;
    }

    /// Grid from explicit points; validates ordering and the body range.
    static OutcomeGrid from_points(std::vector<double> pts, std::size_t body_begin,
                                   std::size_t body_end) {
        OutcomeGrid g;
        g.points = std::move(pts);
        g.levels.assign(g.points.size(), std::nan(""));
        g.body_begin = body_begin;
        g.body_end = body_end;
        g.check();
        return g;
    }

    void check() const {
        if (points.empty()) throw ConfigError("grid: no points");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (std::isnan(points[i])) throw ConfigError("grid: NaN point");
            if (i > 0 && !(points[i] > points[i - 1])) {
                throw ConfigError("grid: points must be sorted and distinct");
            }
        }
        if (body_begin >= body_end || body_end > points.size()) {
            throw ConfigError("grid: body range is empty or out of bounds");
        }
        if (body_begin == 0 && body_end == points.size()) {
            throw ConfigError("grid: body must be a strict subset of the grid");
        }
        for (std::size_t i = body_begin; i < body_end; ++i) {
            if (!std::isfinite(points[i])) throw ConfigError("grid: body points must be finite");
        }
    }
};

/// Evaluation grids for both outcomes plus the tail admissibility count m.
struct GridSpec {
    OutcomeGrid y;
    OutcomeGrid w;
    int tail_min_obs = 30;

    [[nodiscard]] const OutcomeGrid& outcome(Outcome which) const noexcept {
        return which == Outcome::y ? y : w;
    }
};

struct TrimPair {
    double lower = 0.02;
    double upper = 0.98;
};

/// Inverse empirical CDF: the smallest sorted value v with F_n(v) >= p.
inline double empirical_quantile_lower(std::span<const double> sorted, double p) {
    const auto n = static_cast<double>(sorted.size());
    auto k = static_cast<std::ptrdiff_t>(std::ceil(n * p - 1e-9));
    k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(sorted.size()));
    return sorted[static_cast<std::size_t>(k - 1)];
}

/// Grid of empirical quantiles at n_points equally spaced levels spanning
/// [trim.lower, trim.upper]; duplicate quantiles are merged. The body is every
/// point except the outermost one on each side.
inline OutcomeGrid build_outcome_grid(const Vector& values, std::size_t n_points, TrimPair trim) {
    if (n_points < 3) throw ConfigError("build_grid: need at least 3 grid points");
    if (!(trim.lower > 0.0 && trim.lower < trim.upper && trim.upper < 1.0)) {
        throw ConfigError("build_grid: trim levels must satisfy 0 < lower < upper < 1");
    }
    std::vector<double> sorted(values.data(), values.data() + values.size());
    if (sorted.empty()) throw ValidationError("build_grid: empty outcome");
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back()) throw ValidationError("build_grid: outcome is constant");

    OutcomeGrid g;
    for (std::size_t k = 0; k < n_points; ++k) {
        const double level = trim.lower + (trim.upper - trim.lower) * static_cast<double>(k) /
                                              static_cast<double>(n_points - 1);
        const double q = empirical_quantile_lower(sorted, level);
        if (!g.points.empty() && q == g.points.back()) continue;
        g.points.push_back(q);
        g.levels.push_back(level);
    }
    if (g.points.size() < 3) {
        throw ValidationError("build_grid: fewer than 3 distinct quantiles (heavy ties)");
    }
    g.body_begin = 1;
    g.body_end = g.points.size() - 1;
    return g;
}

inline GridSpec build_grid(const Sample& sample, std::size_t n_points, TrimPair trim = {},
                           int tail_min_obs = 30) {
    if (tail_min_obs < 1) throw ConfigError("build_grid: tail_min_obs must be positive");
    GridSpec spec;
    spec.y = build_outcome_grid(sample.y, n_points, trim);
    spec.w = build_outcome_grid(sample.w, n_points, trim);
    spec.tail_min_obs = tail_min_obs;
    return spec;
}

/// (ybar_y, wbar_w): the body points closest to (y, w), ties toward the smaller value.
inline std::pair<double, double> nearest_body_point(const GridSpec& grid, double y, double w) {
    return {grid.y.points[grid.y.nearest_body_index(y)],
            grid.w.points[grid.w.nearest_body_index(w)]};
}

/// Groups supplying (mu, nu, delta, covariate distribution) of a counterfactual.
struct CounterfactualIndex {
    int j = 0;
    int k = 0;
    int l = 0;
    int m = 0;

    /// Parses a four-character string such as "1110".
    static CounterfactualIndex parse(const std::string& s) {
        if (s.size() != 4) throw ConfigError("counterfactual index must have 4 digits: " + s);
        CounterfactualIndex idx;
        int* slots[4] = {&idx.j, &idx.k, &idx.l, &idx.m};
        for (std::size_t i = 0; i < 4; ++i) {
            if (s[i] != '0' && s[i] != '1') {
                throw ConfigError("counterfactual index digits must be 0 or 1: " + s);
            }
            *slots[i] = s[i] - '0';
        }
        return idx;
    }

    [[nodiscard]] std::string str() const {
        return std::to_string(j) + std::to_string(k) + std::to_string(l) + std::to_string(m);
    }

    friend bool operator==(const CounterfactualIndex&, const CounterfactualIndex&) = default;
};

}  // namespace bdr
