#pragma once

// Exchangeable (weighted) bootstrap of the BDR estimator, plus the robust
// standard error and percentile interval used to summarize replicate draws.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bdr/dependence.hpp"
#include "bdr/detail/parallel.hpp"
#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/model.hpp"

namespace bdr {

enum class WeightKind { exponential, multinomial };

/// mean_one and sum_one give the same arg-max; none returns raw draws.
enum class Normalization { mean_one, sum_one, none };

struct WeightScheme {
    WeightKind kind = WeightKind::exponential;
    std::uint64_t seed = 0;
    Normalization normalization = Normalization::mean_one;
};

inline const char* to_string(WeightKind k) {
    return k == WeightKind::exponential ? "exponential" : "multinomial";
}

/// Generator for one (seed, replicate, stream) triple. Streams separate the
/// groups so that their weights are drawn independently.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::uint64_t replicate_id,
                                        std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate_id),
                      static_cast<std::uint32_t>(replicate_id >> 32),
                      static_cast<std::uint32_t>(stream), 0x9e3779b9u};
    return std::mt19937_64(seq);
}

/// Bootstrap weights for n observations; deterministic in (scheme.seed, replicate_id, stream).
inline Vector draw_weights(std::size_t n, const WeightScheme& scheme, std::uint64_t replicate_id,
                           std::uint64_t stream = 0) {
    if (n == 0) throw ConfigError("draw_weights: n must be positive");
    auto eng = replicate_engine(scheme.seed, replicate_id, stream);
    Vector w(static_cast<Eigen::Index>(n));
    if (scheme.kind == WeightKind::exponential) {
        std::exponential_distribution<double> dist(1.0);
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(eng);
    } else {
        w.setZero();
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (std::size_t d = 0; d < n; ++d) w(static_cast<Eigen::Index>(pick(eng))) += 1.0;
    }
    switch (scheme.normalization) {
        case Normalization::mean_one: w *= static_cast<double>(n) / w.sum(); break;
        case Normalization::sum_one: w /= w.sum(); break;
        case Normalization::none: break;
    }
    return w;
}

/// Weighted replicate of a base fit: marginals and tail scales are refitted
/// under `weights` at the base r0 values; delta is refitted under `weights`
/// holding the base marginal indices fixed.
inline BdrFit fit_replicate(const Sample& sample, const GridSpec& grid, const BdrConfig& config,
                            const BdrFit& base, const Vector& weights) {
    if (weights.size() != static_cast<Eigen::Index>(sample.size())) {
        throw ConfigError("fit_replicate: weight length mismatch");
    }
    return detail::fit_bdr_impl(sample, grid, config, weights, &base);
}

/// B replicate fits; draws[r] is empty when replicate r failed.
struct BootstrapEnsemble {
    WeightScheme scheme;
    std::uint64_t stream = 0;
    std::size_t replicates = 0;
    std::vector<std::optional<BdrFit>> draws;
    std::vector<std::string> failures;

    [[nodiscard]] std::size_t failure_count() const noexcept {
        return static_cast<std::size_t>(
            std::count_if(draws.begin(), draws.end(), [](const auto& d) { return !d.has_value(); }));
    }

    /// Regenerates the weights used by replicate r.
    [[nodiscard]] Vector weights(std::size_t n, std::size_t r) const {
        return draw_weights(n, scheme, r, stream);
    }
};

inline constexpr double kMaxFailureShare = 0.10;

/// Exchangeable bootstrap of the full estimator. Replicates run in parallel
/// (each replicate owns its seed, so results do not depend on `threads`).
/// Failed replicates are dropped; more than 10% failures throws
/// InferenceError. Grid pairs whose delta fails inside a replicate count as a
/// replicate failure.
inline BootstrapEnsemble bootstrap_fit(const Sample& sample, const GridSpec& grid,
                                       const BdrConfig& config, const BdrFit& base,
                                       std::size_t replicates, const WeightScheme& scheme,
                                       std::uint64_t stream = 0, unsigned threads = 1) {
    BootstrapEnsemble ens;
    ens.scheme = scheme;
    ens.stream = stream;
    ens.replicates = replicates;
    ens.draws.resize(replicates);
    ens.failures.resize(replicates);
    BdrConfig inner = config;
    inner.threads = 1;
    detail::parallel_for(replicates, threads, [&](std::size_t r) {
        try {
            const Vector w = draw_weights(sample.size(), scheme, r, stream);
            BdrFit fit = fit_replicate(sample, grid, inner, base, w);
            if (fit.count(FitStatus::failed) > 0) {
                ens.failures[r] = "replicate " + std::to_string(r) + ": " +
                                  std::to_string(fit.count(FitStatus::failed)) +
                                  " grid pairs failed";
                return;
            }
            ens.draws[r] = std::move(fit);
        } catch (const Error& e) {
            ens.failures[r] = "replicate " + std::to_string(r) + ": " + e.what();
        }
    });
    if (replicates > 0 &&
        static_cast<double>(ens.failure_count()) > kMaxFailureShare * static_cast<double>(replicates)) {
        throw InferenceError("bootstrap: " + std::to_string(ens.failure_count()) + " of " +
                             std::to_string(replicates) + " replicates failed");
    }
    return ens;
}

/// Linear interpolation between order statistics (sample quantile type 7).
inline double quantile_linear(std::vector<double> values, double p) {
    if (values.empty()) throw InferenceError("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline constexpr std::size_t kMinDraws = 10;

namespace detail {

inline std::vector<double> finite_draws(std::span<const double> draws) {
    std::vector<double> v;
    v.reserve(draws.size());
    for (double d : draws) {
        if (std::isfinite(d)) v.push_back(d);
    }
    if (v.size() < kMinDraws) {
        throw InferenceError("need at least " + std::to_string(kMinDraws) +
                             " valid bootstrap draws, got " + std::to_string(v.size()));
    }
    return v;
}

}  // namespace detail

/// Interquartile range of the draws over the interquartile range of N(0, 1).
inline double robust_se(std::span<const double> draws) {
    const auto v = detail::finite_draws(draws);
    const double iqr = quantile_linear(v, 0.75) - quantile_linear(v, 0.25);
    return iqr / (2.0 * std_normal_quantile(0.75));
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Equal-tailed percentile interval at the given coverage level.
inline Interval percentile_interval(std::span<const double> draws, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InferenceError("interval level must be in (0, 1)");
    const auto v = detail::finite_draws(draws);
    const double tail = (1.0 - level) / 2.0;
    return {quantile_linear(v, tail), quantile_linear(v, 1.0 - tail)};
}

/// Entrywise robust SE over a set of equally shaped replicate matrices.
inline Matrix robust_se(const std::vector<Matrix>& draws) {
    if (draws.empty()) throw InferenceError("robust_se: no draws");
    Matrix out(draws.front().rows(), draws.front().cols());
    std::vector<double> cell(draws.size());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index k = 0; k < out.cols(); ++k) {
            for (std::size_t r = 0; r < draws.size(); ++r) cell[r] = draws[r](i, k);
            out(i, k) = robust_se(cell);
        }
    }
    return out;
}

}  // namespace bdr
