#pragma once

// Gaussian data generating process inside the BDR model class:
//   Y = x'beta + e1,  W = x'gamma + e2,  corr(e1, e2 | x) = tanh(x'delta0).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bdr/errors.hpp"
#include "bdr/gaussian.hpp"
#include "bdr/model.hpp"

namespace bdr {

struct CovariateLaw {
    enum class Kind { uniform, bernoulli };
    Kind kind = Kind::uniform;
    double a = 0.0;  // uniform: lower bound; bernoulli: success probability
    double b = 1.0;  // uniform: upper bound

    static CovariateLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static CovariateLaw bernoulli(double p) { return {Kind::bernoulli, p, 0.0}; }

    [[nodiscard]] double mean() const { return kind == Kind::uniform ? 0.5 * (a + b) : a; }
};

struct DgpSpec {
    Vector beta;
    Vector gamma;
    Vector delta0;
    /// Non-intercept covariates; column 0 of x is always the intercept.
    std::vector<CovariateLaw> covariates{CovariateLaw::uniform(0.0, 1.0),
                                         CovariateLaw::bernoulli(0.5)};
    std::size_t n = 1000;
    std::uint64_t seed = 1;

    [[nodiscard]] Eigen::Index dim() const {
        return static_cast<Eigen::Index>(covariates.size()) + 1;
    }

    void check() const {
        const auto d = dim();
        if (beta.size() != d || gamma.size() != d || delta0.size() != d) {
            throw ConfigError("dgp: beta, gamma and delta0 need " + std::to_string(d) +
                              " entries");
        }
        if (n == 0) throw ConfigError("dgp: n must be positive");
        for (const auto& c : covariates) {
            if (c.kind == CovariateLaw::Kind::uniform && !(c.b > c.a)) {
                throw ConfigError("dgp: uniform covariate needs lo < hi");
            }
            if (c.kind == CovariateLaw::Kind::bernoulli && !(c.a > 0.0 && c.a < 1.0)) {
                throw ConfigError("dgp: bernoulli covariate needs p in (0, 1)");
            }
        }
    }

    /// Intercept-only spec with the given scalar coefficients.
    static DgpSpec intercept_only(double beta0, double gamma0, double delta00, std::size_t n,
                                  std::uint64_t seed) {
        DgpSpec s;
        s.covariates.clear();
        s.beta = Vector::Constant(1, beta0);
        s.gamma = Vector::Constant(1, gamma0);
        s.delta0 = Vector::Constant(1, delta00);
        s.n = n;
        s.seed = seed;
        return s;
    }
};

/// Draws one sample. Column names are "const", "x1", "x2", ...
inline Sample generate(const DgpSpec& spec) {
    spec.check();
    std::mt19937_64 eng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(spec.n);
    const auto d = spec.dim();
    Sample s;
    s.x.resize(n, d);
    s.y.resize(n);
    s.w.resize(n);
    s.covariate_names.push_back("const");
    for (Eigen::Index c = 1; c < d; ++c) s.covariate_names.push_back("x" + std::to_string(c));
    for (Eigen::Index i = 0; i < n; ++i) {
        s.x(i, 0) = 1.0;
        for (Eigen::Index c = 1; c < d; ++c) {
            const auto& law = spec.covariates[static_cast<std::size_t>(c - 1)];
            const double u = unit(eng);
            s.x(i, c) = law.kind == CovariateLaw::Kind::uniform ? law.a + (law.b - law.a) * u
                                                                 : (u < law.a ? 1.0 : 0.0);
        }
        const double rho = std::tanh(s.x.row(i).dot(spec.delta0));
        const double z1 = normal(eng);
        const double z2 = normal(eng);
        s.y(i) = s.x.row(i).dot(spec.beta) + z1;
        s.w(i) = s.x.row(i).dot(spec.gamma) + rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
    }
    return s;
}

/// Phi2(y - x'beta, w - x'gamma; tanh(x'delta0)).
template <typename Row>
double true_joint_cdf(const DgpSpec& spec, double y, double w, const Row& x) {
    const double a = y - x.dot(spec.beta);
    const double b = w - x.dot(spec.gamma);
    return bivariate_normal_cdf(a, b, Correlation(std::tanh(x.dot(spec.delta0))));
}

/// True BDR coefficients implied by the spec: mu_y = (y - beta_0, -beta_rest).
inline Vector true_mu(const DgpSpec& spec, double y) {
    Vector mu = -spec.beta;
    mu(0) += y;
    return mu;
}

inline Vector true_nu(const DgpSpec& spec, double w) {
    Vector nu = -spec.gamma;
    nu(0) += w;
    return nu;
}

/// Stacks two samples into one with group labels 0 and 1.
inline Sample combine_groups(const Sample& g0, const Sample& g1) {
    if (g0.dim() != g1.dim()) throw ValidationError("combine_groups: covariate dimensions differ");
    const auto n0 = static_cast<Eigen::Index>(g0.size());
    const auto n1 = static_cast<Eigen::Index>(g1.size());
    Sample s;
    s.y.resize(n0 + n1);
    s.w.resize(n0 + n1);
    s.x.resize(n0 + n1, g0.x.cols());
    s.y << g0.y, g1.y;
    s.w << g0.w, g1.w;
    s.x << g0.x, g1.x;
    s.group.assign(static_cast<std::size_t>(n0), 0);
    s.group.insert(s.group.end(), static_cast<std::size_t>(n1), 1);
    s.covariate_names = g0.covariate_names;
    return s;
}

}  // namespace bdr
