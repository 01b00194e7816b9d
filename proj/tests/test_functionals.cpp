#include <catch_amalgamated.hpp>

#include <array>

#include "bdr/dgp.hpp"
#include "bdr/functionals.hpp"
#include "oracles.hpp"

using namespace bdr;
using Catch::Matchers::WithinAbs;

namespace {

struct TwoGroups {
    std::array<Sample, 2> samples;
    std::array<BdrFit, 2> fits;
    std::vector<double> y_points;
    std::vector<double> w_points;
};

const TwoGroups& two_groups() {
    static const TwoGroups tg = [] {
        TwoGroups t;
        DgpSpec s0;
        s0.beta = Vector(3);
        s0.beta << 0.0, 0.5, 0.2;
        s0.gamma = Vector(3);
        s0.gamma << 0.1, 0.4, -0.3;
        s0.delta0 = Vector(3);
        s0.delta0 << 0.4, 0.3, 0.0;
        s0.n = 900;
        s0.seed = 101;
        DgpSpec s1 = s0;
        s1.beta(0) = 0.3;
        s1.delta0(0) = 0.1;
        s1.covariates[0] = CovariateLaw::uniform(0.3, 1.3);
        s1.seed = 202;
        t.samples = {generate(s0), generate(s1)};
        // Common grid from the pooled sample.
        const GridSpec g = build_grid(combine_groups(t.samples[0], t.samples[1]), 6);
        for (int k = 0; k < 2; ++k) t.fits[k] = fit_bdr(t.samples[k], g);
        t.y_points = g.y.points;
        t.w_points = g.w.points;
        return t;
    }();
    return tg;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("counterfactual equals the covariate average of the conditional CDF", "[functionals]") {
    const auto& t = two_groups();
    const CounterfactualIndex idx = CounterfactualIndex::parse("1100");
    const auto surf = counterfactual_joint_cdf(t.fits, t.samples, idx, t.y_points, t.w_points);
    const Sample& s0 = t.samples[0];
    for (std::size_t iy : {std::size_t{1}, std::size_t{3}}) {
        for (std::size_t iw : {std::size_t{0}, std::size_t{4}}) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < s0.x.rows(); ++i) {
                const Eigen::RowVectorXd x = s0.x.row(i);
                acc += conditional_joint_cdf(t.fits[1], t.fits[1], t.fits[0], t.y_points[iy],
                                             t.w_points[iw], x);
            }
            CHECK_THAT(surf.at(iy, iw), WithinAbs(acc / static_cast<double>(s0.x.rows()), 1e-13));
        }
    }
    CHECK(idx.str() == "1100");
    CHECK_THROWS_AS(CounterfactualIndex::parse("1201"), ConfigError);
}

TEST_CASE("decomposition telescopes", "[functionals]") {
    const auto& t = two_groups();
    const auto rep = decompose_joint(t.fits, t.samples, t.y_points, t.w_points);
    CHECK(max_abs(rep.residual()) <= 1e-12);
    std::vector<double> yc{-kInf, t.y_points[2], kInf}, wc{-kInf, t.w_points[3], kInf};
    const auto trep = decompose_transition(t.fits, t.samples, yc, wc);
    CHECK(max_abs(trep.residual()) <= 1e-12);
    CHECK(std::abs(trep.total.sum()) <= 1e-12);
}

TEST_CASE("identical groups decompose to zero", "[functionals]") {
    const auto& t = two_groups();
    const std::array<BdrFit, 2> fits{t.fits[0], t.fits[0]};
    const std::array<Sample, 2> samples{t.samples[0], t.samples[0]};
    const auto rep = decompose_joint(fits, samples, t.y_points, t.w_points);
    for (const Matrix* m : {&rep.total, &rep.composition, &rep.sorting, &rep.marginal_w, &rep.marginal_y}) {
        CHECK(max_abs(*m) <= 1e-12);
    }
}

TEST_CASE("group swap negates the total and mirrors the path", "[functionals]") {
    const auto& t = two_groups();
    const auto rep = decompose_joint(t.fits, t.samples, t.y_points, t.w_points);
    const std::array<BdrFit, 2> sf{t.fits[1], t.fits[0]};
    const std::array<Sample, 2> ss{t.samples[1], t.samples[0]};
    const auto swapped = decompose_joint(sf, ss, t.y_points, t.w_points);
    CHECK(max_abs(rep.total + swapped.total) <= 1e-12);

    auto F = [&](const char* idx) {
        return counterfactual_joint_cdf(t.fits, t.samples, CounterfactualIndex::parse(idx),
                                        t.y_points, t.w_points)
            .values;
    };
    const Matrix f0000 = F("0000"), f0001 = F("0001"), f0011 = F("0011"), f0111 = F("0111"),
                 f1111 = F("1111");
    CHECK(max_abs(swapped.composition + (f0001 - f0000)) <= 1e-12);
    CHECK(max_abs(swapped.sorting + (f0011 - f0001)) <= 1e-12);
    CHECK(max_abs(swapped.marginal_w + (f0111 - f0011)) <= 1e-12);
    CHECK(max_abs(swapped.marginal_y + (f1111 - f0111)) <= 1e-12);
    // Componentwise negation is a different path and does not hold in general.
    CHECK(max_abs(rep.composition + swapped.composition) > 1e-6);
}

TEST_CASE("transition matrix from a CDF surface", "[functionals]") {
    const auto& t = two_groups();
    std::vector<double> cuts{-kInf, t.y_points[1], t.y_points[3], kInf};
    std::vector<double> wcuts{-kInf, t.w_points[2], kInf};
    const auto surf = counterfactual_joint_cdf(t.fits, t.samples, CounterfactualIndex::parse("0000"),
                                               cuts, wcuts);
    const auto tm = transition_matrix(surf);
    CHECK(tm.cells.rows() == 3);
    CHECK(tm.cells.cols() == 2);
    CHECK_THAT(tm.total(), WithinAbs(1.0, 1e-12));
    CHECK(tm.min_cell() >= 0.0);

    // Product measure gives products of marginal brackets.
    const std::vector<double> q{-kInf, -0.8416212335729143, -0.2533471031357997, 0.2533471031357997,
                                0.8416212335729143, kInf};
    const auto ind = transition_matrix(
        [](double y, double w) { return bivariate_normal_cdf(y, w, Correlation(0.0)); }, q, q);
    for (Eigen::Index j = 0; j < 5; ++j) {
        for (Eigen::Index k = 0; k < 5; ++k) CHECK_THAT(ind.cells(j, k), WithinAbs(0.04, 1e-12));
    }
    const std::vector<double> bad{-kInf, 1.0, 0.5, kInf};
    CHECK_THROWS_AS(transition_matrix([](double, double) { return 0.0; }, bad, q), ValidationError);
    const std::vector<double> open{-kInf, 0.0, 5.0};
    CHECK_THROWS_AS(transition_matrix([](double, double) { return 0.0; }, open, q), ValidationError);
}

TEST_CASE("shares are guarded near a zero total", "[functionals]") {
    Matrix comp(1, 3), total(1, 3);
    comp << 0.01, 0.002, 0.0001;
    total << 0.02, 0.0005, -0.01;
    const Matrix s = DecompositionReport::share(comp, total);
    CHECK(s(0, 0) == 0.5);
    CHECK(std::isnan(s(0, 1)));
    CHECK(s(0, 2) == -0.01);
}

TEST_CASE("independence counterfactual averages marginal products", "[functionals]") {
    const auto& t = two_groups();
    const auto ind = independence_counterfactual(t.fits[0], t.samples[0], t.y_points, t.w_points);
    const Sample& s = t.samples[0];
    const Vector a = t.fits[0].mu.index_vector(t.y_points[2], s.x);
    const Vector b = t.fits[0].nu.index_vector(t.w_points[3], s.x);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) acc += oracle::normal_cdf(a(i)) * oracle::normal_cdf(b(i));
    CHECK_THAT(ind.at(2, 3), WithinAbs(acc / static_cast<double>(a.size()), 1e-13));
}

TEST_CASE("failed delta pairs propagate as NaN", "[functionals]") {
    const auto& t = two_groups();
    BdrFit broken = t.fits[0];
    broken.delta_body[0].setConstant(std::nan(""));
    broken.status[0].status = FitStatus::failed;
    const std::array<BdrFit, 1> fits{broken};
    const std::array<Sample, 1> samples{t.samples[0]};
    const auto surf = counterfactual_joint_cdf(fits, samples, {}, t.y_points, t.w_points);
    CHECK(std::isnan(surf.at(1, 1)));
    CHECK(std::isfinite(surf.at(3, 3)));
}
