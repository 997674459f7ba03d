#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_support.hpp"
#include "tunekit/evaluation.hpp"

using namespace tunekit;
using namespace tunekit::testing;
using Catch::Approx;

namespace {

// one observable per entry, each a single bin f(p) = p[axis], with the
// given reference uncertainty
SyntheticProblem axis_problem(int dim, const std::vector<int>& axes,
                              const std::vector<double>& unc, const Eigen::VectorXd& p_true) {
    auto space = unit_box(dim);
    std::vector<ObservableSpec> obs(axes.size());
    std::vector<Eigen::VectorXd> u(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        obs[i].id = "ax" + std::to_string(i + 1);
        int a = axes[i];
        obs[i].values.push_back([a](const Eigen::VectorXd& p) { return p[a]; });
        obs[i].uncertainties.push_back([](const Eigen::VectorXd&) { return 0.0; });
        u[i] = Eigen::VectorXd::Constant(1, unc[i]);
    }
    return make_problem(space, obs, sample_points(space, 3 * dim + 4, 13), p_true, u);
}

WeightVector equal_weights(const ReferenceSet& ref) {
    WeightVector w;
    for (const auto& o : ref.observables) w.weights[o.id] = 1.0 / ref.size();
    return w;
}

} // namespace

TEST_CASE("gamma_post") {
    SECTION("scalar case: unit gradient and unit noise give variance 1") {
        Eigen::VectorXd pt(1);
        pt << 0.5;
        auto prob = axis_problem(1, {0}, {1.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        auto g = gamma_post(pt, equal_weights(prob.ref), s, prob.ref);
        REQUIRE(g.matrix(0, 0) == Approx(1.0).margin(1e-9));
        REQUIRE(g.eigenvalues[0] == Approx(1.0).margin(1e-9));
    }
    SECTION("doubling the data uncertainty quadruples the variance") {
        Eigen::VectorXd pt(1);
        pt << 0.5;
        auto prob = axis_problem(1, {0}, {2.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        auto g = gamma_post(pt, equal_weights(prob.ref), s, prob.ref);
        REQUIRE(g.matrix(0, 0) == Approx(4.0).margin(1e-8));
    }
    SECTION("independent axes give a diagonal posterior") {
        Eigen::VectorXd pt(2);
        pt << 0.5, 0.5;
        auto prob = axis_problem(2, {0, 1}, {1.0, 1.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        auto g = gamma_post(pt, equal_weights(prob.ref), s, prob.ref); // w = 1/2 each
        REQUIRE(g.matrix(0, 0) == Approx(2.0).margin(1e-8));
        REQUIRE(g.matrix(1, 1) == Approx(2.0).margin(1e-8));
        REQUIRE(g.matrix(0, 1) == Approx(0.0).margin(1e-8));
    }
    SECTION("unnormalized weights are rejected") {
        Eigen::VectorXd pt(1);
        pt << 0.5;
        auto prob = axis_problem(1, {0}, {1.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        WeightVector w;
        w.weights["ax1"] = 2.0;
        REQUIRE_THROWS_WITH(gamma_post(pt, w, s, prob.ref),
                            Catch::Matchers::ContainsSubstring("normalized"));
    }
    SECTION("a parameter nothing depends on makes the posterior singular") {
        Eigen::VectorXd pt(2);
        pt << 0.5, 0.5;
        auto prob = axis_problem(2, {0, 0}, {1.0, 1.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        REQUIRE_THROWS_WITH(gamma_post(pt, equal_weights(prob.ref), s, prob.ref),
                            Catch::Matchers::ContainsSubstring("unidentifiable"));
    }
}

TEST_CASE("hand-computed 2x2 posterior with correlated gradients") {
    // single observable, bins f1 = p1 and f2 = p1 + p2, unit uncertainties:
    // info = [[2,1],[1,1]], Gamma = [[1,-1],[-1,2]]
    auto space = unit_box(2);
    ObservableSpec o;
    o.id = "pair";
    o.values.push_back([](const Eigen::VectorXd& p) { return p[0]; });
    o.values.push_back([](const Eigen::VectorXd& p) { return p[0] + p[1]; });
    o.uncertainties.push_back([](const Eigen::VectorXd&) { return 0.0; });
    o.uncertainties.push_back([](const Eigen::VectorXd&) { return 0.0; });
    Eigen::VectorXd pt(2);
    pt << 0.4, 0.6;
    auto prob = make_problem(space, {o}, sample_points(space, 10, 19), pt,
                             {Eigen::VectorXd::Ones(2)});
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
    WeightVector w;
    w.weights["pair"] = 1.0;
    auto g = gamma_post(pt, w, s, prob.ref);
    Eigen::MatrixXd expect(2, 2);
    expect << 1.0, -1.0, -1.0, 2.0;
    REQUIRE((g.matrix - expect).cwiseAbs().maxCoeff() <= 1e-8);

    SECTION("optimality summaries against the closed forms") {
        REQUIRE(a_optimality(g) == Approx(3.0).margin(1e-8));
        REQUIRE(d_optimality_log(g) == Approx(std::log(1.0)).margin(1e-8)); // det = 1
        // eigenvalues of [[1,-1],[-1,2]] are (3 +/- sqrt(5)) / 2, ascending
        REQUIRE(g.eigenvalues[0] == Approx((3.0 - std::sqrt(5.0)) / 2.0).margin(1e-8));
        REQUIRE(g.eigenvalues[1] == Approx((3.0 + std::sqrt(5.0)) / 2.0).margin(1e-8));
    }
}

TEST_CASE("optimality summaries on synthetic diagonal matrices") {
    PosteriorCovariance g;
    g.matrix = Eigen::Vector2d(2.0, 8.0).asDiagonal();
    g.eigenvalues = Eigen::Vector2d(2.0, 8.0);
    REQUIRE(a_optimality(g) == Approx(10.0));
    REQUIRE(d_optimality_log(g) == Approx(std::log(16.0)));
    g.eigenvalues[0] = 0.0;
    REQUIRE_THROWS_AS(d_optimality_log(g), TuneError);
}

TEST_CASE("ellipsoid coverage") {
    Eigen::VectorXd pt(1);
    pt << 0.5;
    auto prob = axis_problem(1, {0}, {2.0}, pt); // Gamma = [[4]]
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
    auto g = gamma_post(pt, equal_weights(prob.ref), s, prob.ref);
    REQUIRE(ellipsoid_coverage(pt, pt, g) == 0.0);
    Eigen::VectorXd q(1);
    q << 0.75;
    // L = 2, |L^T (q - p_hat)| = 2 * 0.25
    REQUIRE(ellipsoid_coverage(q, pt, g) == Approx(0.5).margin(1e-8));
}

TEST_CASE("weighted_chi2_metric normalizes and forwards the stored tune") {
    Eigen::VectorXd pt(1);
    pt << 0.5;
    auto prob = axis_problem(1, {0}, {0.5}, pt);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
    TuneResult res;
    res.p_star = Eigen::VectorXd::Constant(1, 0.75);
    res.weights.weights["ax1"] = 7.0; // deliberately unnormalized
    WeightVector unit;
    unit.weights["ax1"] = 1.0;
    REQUIRE(weighted_chi2_metric(res, s, prob.ref) ==
            Approx(chi2(res.p_star, unit, s, prob.ref)).margin(1e-12));
    REQUIRE(weighted_chi2_metric(res, s, prob.ref) == Approx(0.25 * 0.25 / 0.25).margin(1e-8));
}

TEST_CASE("effective_n") {
    SECTION("410 equal weights with 10 parameters give 4.0") {
        WeightVector w;
        for (int i = 0; i < 410; ++i) w.weights["o" + std::to_string(i)] = 1.0 / 410.0;
        REQUIRE(effective_n(w, 10) == Approx(4.0).margin(1e-9));
    }
    SECTION("all weight on one observable is too concentrated") {
        WeightVector w;
        w.weights["a"] = 1.0;
        w.weights["b"] = 0.0;
        REQUIRE_THROWS_WITH(effective_n(w, 1),
                            Catch::Matchers::ContainsSubstring("too few effective observables"));
    }
    SECTION("gamma = 0 yields 0 instead of an error") {
        WeightVector w;
        w.weights["a"] = 1.0;
        REQUIRE(effective_n(w, 5, 0.0) == 0.0);
    }
    SECTION("unnormalized input is rejected") {
        WeightVector w;
        w.weights["a"] = 0.3;
        REQUIRE_THROWS_AS(effective_n(w, 1), TuneError);
    }
}

TEST_CASE("eigentune") {
    SECTION("1-d quadratic: displacement solves kappa alpha^2 = n exactly") {
        Eigen::VectorXd pt(1);
        pt << 0.5;
        auto prob = axis_problem(1, {0}, {0.3}, pt); // chi2 = (p - 0.5)^2 / 0.09
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        WeightVector w;
        w.weights["ax1"] = 1.0;
        double n = 0.09; // alpha = sqrt(n * 0.09) = 0.09
        Eigentune et = eigentune(pt, w, s, prob.ref, prob.space, n);
        REQUIRE(et.intervals.size() == 1);
        REQUIRE(et.intervals[0].first == Approx(0.41).margin(1e-5));
        REQUIRE(et.intervals[0].second == Approx(0.59).margin(1e-5));
        REQUIRE(et.n_effective == n);
        // the displaced endpoints actually sit on the chi2 level set
        double base = chi2(pt, w, s, prob.ref);
        Eigen::VectorXd hi = Eigen::VectorXd::Constant(1, et.intervals[0].second);
        REQUIRE(chi2(hi, w, s, prob.ref) - base == Approx(n).margin(1e-5));
    }
    SECTION("2-d anisotropic: each eigendirection gets its own scale") {
        Eigen::VectorXd pt(2);
        pt << 0.5, 0.5;
        // chi2 = 0.5 (p1 - .5)^2 + 2 (p2 - .5)^2; Gamma = diag(2, 0.5)
        auto prob = axis_problem(2, {0, 1}, {1.0, 0.5}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        WeightVector w = equal_weights(prob.ref);
        double n = 0.02;
        Eigentune et = eigentune(pt, w, s, prob.ref, prob.space, n);
        // along p1 (flat direction, largest variance): alpha = sqrt(n / 0.5) = 0.2
        REQUIRE(et.intervals[0].first == Approx(0.3).margin(1e-5));
        REQUIRE(et.intervals[0].second == Approx(0.7).margin(1e-5));
        // along p2 (stiff direction): alpha = sqrt(n / 2) = 0.1
        REQUIRE(et.intervals[1].first == Approx(0.4).margin(1e-5));
        REQUIRE(et.intervals[1].second == Approx(0.6).margin(1e-5));
    }
    SECTION("interval edges below zero clamp to zero") {
        Eigen::VectorXd pt(1);
        pt << 0.02;
        auto prob = axis_problem(1, {0}, {0.3}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        WeightVector w;
        w.weights["ax1"] = 1.0;
        Eigentune et = eigentune(pt, w, s, prob.ref, prob.space, 0.09); // alpha = 0.09
        REQUIRE(et.intervals[0].first == 0.0);
        REQUIRE(et.intervals[0].second == Approx(0.11).margin(1e-5));
    }
    SECTION("non-positive n is rejected") {
        Eigen::VectorXd pt(1);
        pt << 0.5;
        auto prob = axis_problem(1, {0}, {1.0}, pt);
        SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);
        WeightVector w;
        w.weights["ax1"] = 1.0;
        REQUIRE_THROWS_AS(eigentune(pt, w, s, prob.ref, prob.space, 0.0), TuneError);
    }
}
