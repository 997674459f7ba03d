#pragma once

// Synthetic problem builders shared by the unit and acceptance suites.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/data_model.hpp"
#include "tunekit/surrogate.hpp"

namespace tunekit::testing {

inline ParameterSpace unit_box(int d, double lo = 0.0, double hi = 1.0) {
    ParameterSpace space;
    for (int i = 0; i < d; ++i) space.names.push_back("p" + std::to_string(i + 1));
    space.lower = Eigen::VectorXd::Constant(d, lo);
    space.upper = Eigen::VectorXd::Constant(d, hi);
    return space;
}

struct ObservableSpec {
    std::string id;
    // per-bin value and uncertainty generators as functions of p
    std::vector<std::function<double(const Eigen::VectorXd&)>> values;
    std::vector<std::function<double(const Eigen::VectorXd&)>> uncertainties;
};

// Build a reference set + MC grid from closed-form bin functions; the
// reference data is the bin function at p_true plus an optional shift.
struct SyntheticProblem {
    ParameterSpace space;
    ReferenceSet ref;
    MCRunGrid grid;
};

inline SyntheticProblem make_problem(const ParameterSpace& space,
                                     const std::vector<ObservableSpec>& obs,
                                     const Eigen::MatrixXd& points,
                                     const Eigen::VectorXd& p_ref,
                                     const std::vector<Eigen::VectorXd>& ref_unc) {
    SyntheticProblem prob;
    prob.space = space;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        Observable o;
        o.id = obs[i].id;
        int nb = static_cast<int>(obs[i].values.size());
        o.values.resize(nb);
        o.uncertainties = ref_unc[i];
        for (int b = 0; b < nb; ++b) o.values[b] = obs[i].values[static_cast<std::size_t>(b)](p_ref);
        prob.ref.observables.push_back(std::move(o));
    }
    prob.ref.rebuild_index();
    prob.ref.validate();

    prob.grid.space = space;
    prob.grid.points = points;
    int n = static_cast<int>(points.rows());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        int nb = static_cast<int>(obs[i].values.size());
        Eigen::MatrixXd v(n, nb), u(n, nb);
        for (int r = 0; r < n; ++r) {
            Eigen::VectorXd p = points.row(r).transpose();
            for (int b = 0; b < nb; ++b) {
                v(r, b) = obs[i].values[static_cast<std::size_t>(b)](p);
                u(r, b) = obs[i].uncertainties[static_cast<std::size_t>(b)](p);
            }
        }
        prob.grid.values.push_back(std::move(v));
        prob.grid.uncertainties.push_back(std::move(u));
    }
    prob.grid.validate(prob.ref);
    return prob;
}

// Deterministic scattered points in the box.
inline Eigen::MatrixXd sample_points(const ParameterSpace& space, int n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd pts(n, space.dim());
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < space.dim(); ++c)
            pts(r, c) = rng.uniform(space.lower[c], space.upper[c]);
    return pts;
}

} // namespace tunekit::testing
