#pragma once

// Outer derivative-free optimization over the weight simplex: Dirichlet
// sampling, cubic RBF interpolation in the reduced (|S_O|-1)-dimensional
// space, candidate scoring that trades off predicted value against
// distance to evaluated points, and the full bilevel loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/chi2.hpp"
#include "tunekit/data_model.hpp"
#include "tunekit/surrogate.hpp"

namespace tunekit {

struct OuterConfig {
    int n0 = 0;      // 0 means |S_O| + 1
    int n_max = 1000;
    int n_cand = 0;  // 0 means 500 * |S_O|
    std::vector<double> nu_cycle = {0.3, 0.5, 0.8, 0.95};
    double lambda = 1.0; // risk aversion of the portfolio objective
    std::uint64_t seed = 0;

    int resolved_n0(int n_obs) const { return n0 > 0 ? n0 : n_obs + 1; }
    int resolved_n_cand(int n_obs) const { return n_cand > 0 ? n_cand : 500 * n_obs; }

    void validate(int n_obs) const {
        if (resolved_n0(n_obs) < n_obs + 1)
            throw TuneError("outer config: n0 must be >= number of observables + 1");
        if (n_max < resolved_n0(n_obs))
            throw TuneError("outer config: n_max must be >= n0");
        if (nu_cycle.empty()) throw TuneError("outer config: empty nu cycle");
        for (double nu : nu_cycle)
            if (nu < 0.0 || nu > 1.0) throw TuneError("outer config: nu outside [0,1]");
    }
};

// n x dim matrix of points uniform on the unit simplex (symmetric
// Dirichlet with unit concentration, sampled via normalized exponentials).
inline Eigen::MatrixXd dirichlet_design(int n, int dim, Rng& rng) {
    Eigen::MatrixXd pts(n, dim);
    for (int r = 0; r < n; ++r) {
        double sum = 0.0;
        for (int c = 0; c < dim; ++c) {
            pts(r, c) = rng.exponential();
            sum += pts(r, c);
        }
        pts.row(r) /= sum;
    }
    return pts;
}

inline Eigen::MatrixXd dirichlet_design(int n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    return dirichlet_design(n, dim, rng);
}

// Cubic RBF interpolant with linear tail, over reduced-dimension points.
struct RbfModel {
    Eigen::MatrixXd centers; // n x dim (reduced weight coordinates)
    Eigen::VectorXd gamma;   // n
    Eigen::VectorXd beta;    // dim
    double beta0 = 0.0;

    double predict(const Eigen::VectorXd& x) const {
        double acc = beta0 + beta.dot(x);
        for (int i = 0; i < centers.rows(); ++i) {
            double r = (centers.row(i).transpose() - x).norm();
            acc += gamma[i] * r * r * r;
        }
        return acc;
    }
};

inline RbfModel fit_rbf(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
    int n = static_cast<int>(points.rows());
    int dim = static_cast<int>(points.cols());
    if (n < dim + 1) throw TuneError("rbf fit: need at least dim+1 points");
    // [ Phi  W ] [gamma]   [g]
    // [ W^T  0 ] [beta ] = [0],  W = [points 1]
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + dim + 1, n + dim + 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double r = (points.row(i) - points.row(j)).norm();
            A(i, j) = r * r * r;
        }
    A.block(0, n, n, dim) = points;
    A.block(0, n + dim, n, 1).setOnes();
    A.block(n, 0, dim, n) = points.transpose();
    A.block(n + dim, 0, 1, n).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + dim + 1);
    rhs.head(n) = values;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw TuneError("rbf fit: singular interpolation system; add points or spread them out");
    Eigen::VectorXd sol = lu.solve(rhs);
    RbfModel m;
    m.centers = points;
    m.gamma = sol.head(n);
    m.beta = sol.segment(n, dim);
    m.beta0 = sol[n + dim];
    // interpolation must hold at the centers
    for (int i = 0; i < n; ++i)
        if (std::abs(m.predict(points.row(i).transpose()) - values[i]) > 1e-6)
            throw TuneError("rbf fit: interpolation check failed (ill-conditioned system)");
    return m;
}

// Score V = nu * V_s + (1 - nu) * V_d over a Dirichlet candidate pool and
// return the minimizer as a full-dimension simplex vector. Ties (and the
// flat-model degenerate case, where V_s is defined as 0) resolve to the
// smallest candidate index.
inline Eigen::VectorXd propose_candidate(const RbfModel& model, const Eigen::MatrixXd& evaluated,
                                         double nu, int n_cand, Rng& rng) {
    int full_dim = static_cast<int>(evaluated.cols()) + 1;
    Eigen::MatrixXd pool = dirichlet_design(n_cand, full_dim, rng);
    Eigen::MatrixXd reduced = pool.leftCols(full_dim - 1);

    Eigen::VectorXd sv(n_cand), dv(n_cand);
    for (int k = 0; k < n_cand; ++k) {
        Eigen::VectorXd x = reduced.row(k).transpose();
        sv[k] = model.predict(x);
        double dmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < evaluated.rows(); ++i)
            dmin = std::min(dmin, (evaluated.row(i).transpose() - x).norm());
        dv[k] = dmin;
    }
    double s_min = sv.minCoeff(), s_max = sv.maxCoeff();
    double d_min = dv.minCoeff(), d_max = dv.maxCoeff();
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n_cand; ++k) {
        double vs = (s_max > s_min) ? (sv[k] - s_min) / (s_max - s_min) : 0.0;
        double vd = (d_max > d_min) ? (d_max - dv[k]) / (d_max - d_min) : 0.0;
        double v = nu * vs + (1.0 - nu) * vd;
        if (v < best_score) {
            best_score = v;
            best = k;
        }
    }
    return pool.row(best).transpose();
}

// --- outer objectives ---------------------------------------------------

// Portfolio: mean + lambda * population variance of per-observable
// bin-averaged errors.
inline double outer_portfolio(const std::vector<double>& errors, double lambda = 1.0) {
    if (errors.empty()) throw TuneError("portfolio objective: no observables");
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errors.size());
    return mean + lambda * var;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-bin score ((f_b - R_b)/dR_b)^2 + log(dR_b^2), per masked observable.
inline std::vector<std::vector<double>> bin_scores(const Eigen::VectorXd& p,
                                                   const SurrogateSet& s, const ReferenceSet& ref,
                                                   const FilterMask& mask) {
    Eigen::VectorXd x = s.scaling.to_unit(p);
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        if (mask.observable_excluded(o.id)) continue;
        std::vector<double> scores;
        for (int b = 0; b < o.bins(); ++b) {
            if (!mask.bin_included(o.id, b)) continue;
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            double f = eval_model(s.value_models[k], x, where);
            double z = (f - o.values[b]) / o.uncertainties[b];
            scores.push_back(z * z + std::log(o.uncertainties[b] * o.uncertainties[b]));
        }
        if (!scores.empty()) out.push_back(std::move(scores));
    }
    return out;
}

} // namespace detail

inline double outer_medianscore(const Eigen::VectorXd& p, const SurrogateSet& s,
                                const ReferenceSet& ref, const FilterMask& mask = {}) {
    double total = 0.0;
    for (const auto& scores : detail::bin_scores(p, s, ref, mask))
        total += detail::median_of(scores);
    return total;
}

inline double outer_meanscore(const Eigen::VectorXd& p, const SurrogateSet& s,
                              const ReferenceSet& ref, const FilterMask& mask = {}) {
    double total = 0.0;
    for (const auto& scores : detail::bin_scores(p, s, ref, mask)) {
        double m = 0.0;
        for (double v : scores) m += v;
        total += m / static_cast<double>(scores.size());
    }
    return total;
}

// Per-observable bin-averaged errors e_O at p (portfolio inputs).
inline std::vector<double> observable_errors(const Eigen::VectorXd& p, const SurrogateSet& s,
                                             const ReferenceSet& ref, const FilterMask& mask = {}) {
    std::vector<double> errors;
    for (const auto& o : ref.observables) {
        if (mask.observable_excluded(o.id)) continue;
        errors.push_back(per_observable_chi2(p, s, ref, o.id, mask));
    }
    return errors;
}

enum class OuterObjective { Portfolio, Meanscore, Medianscore };

inline TuneMethod method_of(OuterObjective obj) {
    switch (obj) {
    case OuterObjective::Portfolio: return TuneMethod::BilevelPortfolio;
    case OuterObjective::Meanscore: return TuneMethod::BilevelMeanscore;
    case OuterObjective::Medianscore: return TuneMethod::BilevelMedianscore;
    }
    throw TuneError("bad outer objective enum");
}

// --- the bilevel loop ---------------------------------------------------

struct BilevelEvaluation {
    WeightVector weights;
    Eigen::VectorXd p_hat;
    double outer_value = 0.0; // +inf when the inner solve failed
};

namespace detail {

inline WeightVector weights_from_simplex(const Eigen::VectorXd& w,
                                         const std::vector<std::string>& ids) {
    WeightVector out;
    for (std::size_t i = 0; i < ids.size(); ++i)
        out.weights[ids[i]] = std::max(0.0, w[static_cast<int>(i)]);
    return out;
}

} // namespace detail

inline TuneResult run_bilevel(OuterObjective objective, const SurrogateSet& s,
                              const ReferenceSet& ref, const FilterMask& mask,
                              const ParameterSpace& box, const OuterConfig& outer_cfg,
                              const Chi2Config& inner_cfg,
                              std::vector<BilevelEvaluation>* evaluations = nullptr) {
    std::vector<std::string> ids;
    for (const auto& o : ref.observables)
        if (!mask.observable_excluded(o.id)) ids.push_back(o.id);
    int n_obs = static_cast<int>(ids.size());
    if (n_obs < 1) throw TuneError("bilevel: no observables left after masking");
    outer_cfg.validate(n_obs);
    int n0 = outer_cfg.resolved_n0(n_obs);
    int n_cand = outer_cfg.resolved_n_cand(n_obs);

    Rng rng(outer_cfg.seed);
    Chi2Config inner = inner_cfg;
    inner.seed = inner_cfg.seed;

    auto evaluate = [&](const Eigen::VectorXd& wfull) -> BilevelEvaluation {
        BilevelEvaluation ev;
        ev.weights = detail::weights_from_simplex(wfull, ids);
        try {
            auto [p, v] = minimize_chi2(ev.weights, s, ref, mask, box, inner);
            (void)v;
            ev.p_hat = p;
            switch (objective) {
            case OuterObjective::Portfolio:
                ev.outer_value = outer_portfolio(observable_errors(p, s, ref, mask), outer_cfg.lambda);
                break;
            case OuterObjective::Meanscore:
                ev.outer_value = outer_meanscore(p, s, ref, mask);
                break;
            case OuterObjective::Medianscore:
                ev.outer_value = outer_medianscore(p, s, ref, mask);
                break;
            }
        } catch (const TuneError&) {
            ev.outer_value = std::numeric_limits<double>::infinity();
        }
        return ev;
    };

    std::vector<BilevelEvaluation> history;
    history.reserve(static_cast<std::size_t>(outer_cfg.n_max));

    Eigen::MatrixXd design = dirichlet_design(n0, n_obs, rng);
    for (int i = 0; i < n0; ++i) history.push_back(evaluate(design.row(i).transpose()));

    std::size_t nu_pos = 0;
    while (static_cast<int>(history.size()) < outer_cfg.n_max) {
        // centers: reduced coordinates of all finite-valued evaluations
        std::vector<int> ok;
        for (std::size_t i = 0; i < history.size(); ++i)
            if (std::isfinite(history[i].outer_value)) ok.push_back(static_cast<int>(i));
        Eigen::VectorXd wnew;
        if (static_cast<int>(ok.size()) >= n_obs && n_obs >= 2) {
            Eigen::MatrixXd centers(static_cast<int>(ok.size()), n_obs - 1);
            Eigen::VectorXd values(static_cast<int>(ok.size()));
            for (std::size_t j = 0; j < ok.size(); ++j) {
                const auto& ev = history[static_cast<std::size_t>(ok[j])];
                for (int c = 0; c + 1 < n_obs; ++c)
                    centers(static_cast<int>(j), c) = ev.weights.at(ids[static_cast<std::size_t>(c)]);
                values[static_cast<int>(j)] = ev.outer_value;
            }
            double nu = outer_cfg.nu_cycle[nu_pos % outer_cfg.nu_cycle.size()];
            ++nu_pos;
            try {
                RbfModel model = fit_rbf(centers, values);
                wnew = propose_candidate(model, centers, nu, n_cand, rng);
            } catch (const TuneError&) {
                wnew = dirichlet_design(1, n_obs, rng).row(0).transpose();
            }
        } else {
            wnew = dirichlet_design(1, n_obs, rng).row(0).transpose();
        }
        history.push_back(evaluate(wnew));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i].outer_value < history[best].outer_value) best = i;
    if (!std::isfinite(history[best].outer_value))
        throw TuneError("bilevel: every outer evaluation failed");

    TuneResult res;
    res.method = method_of(objective);
    res.weights = normalize_weights(history[best].weights);
    res.p_star = history[best].p_hat;
    res.objective_value = history[best].outer_value;
    res.mask = mask;
    res.seed = outer_cfg.seed;
    for (const auto& ev : history) res.history.emplace_back(ev.weights, ev.outer_value);
    if (evaluations) *evaluations = history;
    return res;
}

} // namespace tunekit
