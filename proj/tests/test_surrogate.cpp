#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "test_support.hpp"
#include "tunekit/surrogate.hpp"

using namespace tunekit;
using namespace tunekit::testing;
using Catch::Approx;

namespace {

// One observable whose bins follow the given functions; constant unit
// uncertainty unless overridden.
SyntheticProblem one_obs_problem(const ParameterSpace& space,
                                 std::vector<std::function<double(const Eigen::VectorXd&)>> fns,
                                 int n_points, std::uint64_t seed = 7) {
    ObservableSpec spec;
    spec.id = "obs";
    spec.values = fns;
    for (std::size_t b = 0; b < fns.size(); ++b)
        spec.uncertainties.push_back([](const Eigen::VectorXd&) { return 0.5; });
    Eigen::VectorXd unc = Eigen::VectorXd::Constant(static_cast<int>(fns.size()), 1.0);
    Eigen::MatrixXd pts = sample_points(space, n_points, seed);
    return make_problem(space, {spec}, pts, space.lower, {unc});
}

} // namespace

TEST_CASE("monomial basis size and exponents") {
    REQUIRE(basis_size(1, 3) == 4);
    REQUIRE(basis_size(2, 3) == 10);
    REQUIRE(basis_size(10, 3) == 286);
    auto exps = monomial_exponents(2, 2);
    REQUIRE(exps.size() == 6);
    REQUIRE(exps[0] == std::vector<int>{0, 0});
}

TEST_CASE("polynomial fit recovers a 1-d cubic exactly") {
    // f(p) = 1 + 2p + 3p^3, oracle: direct least squares on a Vandermonde
    // system in the original coordinate; verified by held-out prediction.
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) {
                                    return 1.0 + 2.0 * p[0] + 3.0 * p[0] * p[0] * p[0];
                                }},
                                10);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 3);
    Rng rng(123);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd p(1);
        p[0] = rng.uniform();
        double truth = 1.0 + 2.0 * p[0] + 3.0 * p[0] * p[0] * p[0];
        REQUIRE(eval(s, p).bins[0].value == Approx(truth).margin(1e-10));
    }
    // In scaled coordinates x = 2p - 1 the same cubic has coefficients
    // (recomputed through the affine substitution) matching to 1e-10.
    const auto& pm = std::get<PolynomialModel>(s.value_models[0]);
    // graded order in 1d: 1, x, x^2, x^3; p = (x+1)/2
    // 1 + 2p + 3p^3 = 1 + (x+1) + 3((x+1)/2)^3 = 2.375 + 2.125x + 1.125x^2 + 0.375x^3
    REQUIRE(pm.coefficients[0] == Approx(2.375).margin(1e-10));
    REQUIRE(pm.coefficients[1] == Approx(2.125).margin(1e-10));
    REQUIRE(pm.coefficients[2] == Approx(1.125).margin(1e-10));
    REQUIRE(pm.coefficients[3] == Approx(0.375).margin(1e-10));
}

TEST_CASE("constant data gives a constant model") {
    auto space = unit_box(2);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd&) { return 5.0; }}, 12);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 2);
    const auto& pm = std::get<PolynomialModel>(s.value_models[0]);
    REQUIRE(pm.coefficients[0] == Approx(5.0).margin(1e-10));
    for (int i = 1; i < pm.coefficients.size(); ++i)
        REQUIRE(pm.coefficients[i] == Approx(0.0).margin(1e-10));
}

TEST_CASE("too few runs for the requested degree") {
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) { return p[0]; }}, 3);
    REQUIRE_THROWS_WITH(fit_polynomial(prob.grid, prob.ref, 3),
                        Catch::Matchers::ContainsSubstring("needs >= 4"));
}

TEST_CASE("rational fit recovers (1+p)/(2+p)") {
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) {
                                    return (1.0 + p[0]) / (2.0 + p[0]);
                                }},
                                20);
    SurrogateSet s = fit_rational(prob.grid, prob.ref, 3, 1);
    Rng rng(55);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd p(1);
        p[0] = rng.uniform();
        double truth = (1.0 + p[0]) / (2.0 + p[0]);
        REQUIRE(std::abs(eval(s, p).bins[0].value - truth) / std::abs(truth) <= 1e-8);
    }
}

TEST_CASE("rational degenerates to polynomial on polynomial data") {
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) { return 2.0 + 3.0 * p[0]; }}, 20);
    SurrogateSet s = fit_rational(prob.grid, prob.ref, 3, 1);
    const auto& rm = std::get<RationalModel>(s.value_models[0]);
    REQUIRE(rm.den_coefficients[0] == 1.0);
    Eigen::VectorXd p(1);
    p[0] = 0.37;
    REQUIRE(eval(s, p).bins[0].value == Approx(2.0 + 3.0 * 0.37).margin(1e-8));
}

TEST_CASE("pole inside the sampled domain is rejected") {
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) {
                                    return 1.0 / (p[0] - 0.5);
                                }},
                                24, 99);
    REQUIRE_THROWS_AS(fit_rational(prob.grid, prob.ref, 3, 1), PoleError);
}

TEST_CASE("eval flags extrapolation and clamps negative uncertainties") {
    auto space = unit_box(1);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) { return p[0]; }}, 10);
    // uncertainty model dips negative outside: fit df = p - 0.2 style data
    for (int r = 0; r < prob.grid.runs(); ++r)
        prob.grid.uncertainties[0](r, 0) = prob.grid.points(r, 0) - 0.2;
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 1);

    Eigen::VectorXd inside(1), outside(1), low(1);
    inside[0] = 0.5;
    outside[0] = 1.5;
    low[0] = 0.1; // df model = -0.1 here
    REQUIRE_FALSE(eval(s, inside).extrapolated);
    REQUIRE(eval(s, outside).extrapolated);
    REQUIRE(eval(s, low).bins[0].uncertainty == 0.0);
}

TEST_CASE("eval at a grid point of an exact fit returns the grid value") {
    auto space = unit_box(2);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) {
                                    return 1.0 + p[0] * p[1];
                                }},
                                15);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 2);
    Eigen::VectorXd p = prob.grid.points.row(3).transpose();
    REQUIRE(eval(s, p).bins[0].value == Approx(prob.grid.values[0](3, 0)).margin(1e-10));
}

TEST_CASE("gradients: analytic cases") {
    auto space = unit_box(1, 0.0, 4.0);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) { return p[0] * p[0]; }}, 10);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 2);
    Eigen::VectorXd p(1);
    p[0] = 3.0;
    REQUIRE(eval_gradient(s, p)[0].value[0] == Approx(6.0).margin(1e-8));

    auto prob2 = one_obs_problem(unit_box(1), {[](const Eigen::VectorXd& q) {
                                     return (1.0 + q[0]) / (2.0 + q[0]);
                                 }},
                                 20);
    SurrogateSet s2 = fit_rational(prob2.grid, prob2.ref, 3, 1);
    Eigen::VectorXd z(1);
    z[0] = 0.0;
    REQUIRE(eval_gradient(s2, z)[0].value[0] == Approx(0.25).margin(1e-6));
}

TEST_CASE("gradient matches central finite differences on random cubics") {
    auto space = unit_box(3);
    Rng coeff_rng(2024);
    auto fn = [&](const Eigen::VectorXd& p) {
        return 0.3 + p[0] - 0.7 * p[1] * p[2] + 0.4 * p[0] * p[0] * p[2] - p[1] * p[1] * p[1];
    };
    auto prob = one_obs_problem(space, {fn}, 40);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 3);
    Rng rng(31);
    double h = 1e-5;
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd p(3);
        for (int i = 0; i < 3; ++i) p[i] = rng.uniform(0.1, 0.9);
        Eigen::VectorXd g = eval_gradient(s, p)[0].value;
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd pp = p, pm = p;
            pp[i] += h;
            pm[i] -= h;
            double fd = (eval(s, pp).bins[0].value - eval(s, pm).bins[0].value) / (2 * h);
            REQUIRE(std::abs(g[i] - fd) <= 1e-5 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("envelope: per-bin min and max over runs") {
    auto space = unit_box(1);
    ObservableSpec spec;
    spec.id = "o";
    spec.values = {[](const Eigen::VectorXd& p) { return 3.0 + 2.0 * p[0]; },
                   [](const Eigen::VectorXd& p) { return 1.0 - p[0]; }};
    spec.uncertainties = {[](const Eigen::VectorXd&) { return 0.1; },
                          [](const Eigen::VectorXd&) { return 0.1; }};
    Eigen::MatrixXd pts(3, 1);
    pts << 0.0, 1.0, 0.5;
    auto prob = make_problem(space, {spec}, pts, space.lower,
                             {Eigen::VectorXd::Constant(2, 1.0)});
    auto env = envelope(prob.grid);
    REQUIRE(env[0].first == Approx(3.0));
    REQUIRE(env[0].second == Approx(5.0));
    REQUIRE(env[1].first == Approx(0.0));
    REQUIRE(env[1].second == Approx(1.0));

    // single run degenerates to (v, v)
    Eigen::MatrixXd one(1, 1);
    one << 0.25;
    auto prob1 = make_problem(space, {spec}, one, space.lower, {Eigen::VectorXd::Constant(2, 1.0)});
    auto env1 = envelope(prob1.grid);
    REQUIRE(env1[0].first == env1[0].second);
}

TEST_CASE("surrogate serialization round-trips bit-exactly") {
    auto space = unit_box(2);
    auto prob = one_obs_problem(space, {[](const Eigen::VectorXd& p) {
                                    return 1.0 / 3.0 + p[0] * 0.1 + p[1];
                                }},
                                15);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 2);
    SurrogateSet back = surrogate_from_json(surrogate_to_json(s));
    REQUIRE(back.total_bins() == s.total_bins());
    const auto& a = std::get<PolynomialModel>(s.value_models[0]);
    const auto& b = std::get<PolynomialModel>(back.value_models[0]);
    REQUIRE(a.coefficients == b.coefficients);
    Eigen::VectorXd p(2);
    p << 0.123, 0.456;
    REQUIRE(eval(s, p).bins[0].value == eval(back, p).bins[0].value);
}

TEST_CASE("held-out exactness for degree <= fit degree ground truth") {
    auto space = unit_box(2, -1.0, 2.0);
    auto fn = [](const Eigen::VectorXd& p) {
        return 2.0 - p[0] + 0.5 * p[1] * p[1] + 0.25 * p[0] * p[1];
    };
    auto prob = one_obs_problem(space, {fn}, 25);
    SurrogateSet s = fit_polynomial(prob.grid, prob.ref, 3);
    Rng rng(77);
    for (int k = 0; k < 30; ++k) {
        Eigen::VectorXd p(2);
        for (int i = 0; i < 2; ++i) p[i] = rng.uniform(-1.0, 2.0);
        double truth = fn(p);
        REQUIRE(std::abs(eval(s, p).bins[0].value - truth) <= 1e-8 * (1.0 + std::abs(truth)));
    }
}
