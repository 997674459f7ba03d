#pragma once

// Single-level robust (minimax) tuning. The slack variables are eliminated
// in closed form (the worst case of a convex quadratic over an interval is
// attained at an endpoint) and the weights by the LP ratio test, leaving a
// piecewise-smooth objective in p alone that is minimized by multistart
// compass search.

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

struct RobustConfig {
    double mu = 100.0; // percentage in (0, 100]
    int multistarts = 10;
    int max_iterations = 2000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(mu > 0.0 && mu <= 100.0)) throw TuneError("robust config: mu must be in (0, 100]");
        if (multistarts < 1) throw TuneError("robust config: multistarts must be >= 1");
    }
};

struct CdfCurve {
    std::vector<double> taus;   // sorted ascending
    std::vector<int> counts;    // observables with statistic <= tau
};

// t_b = max over the uncertainty interval of (f_b - R)^2; the maximum of a
// convex quadratic over an interval sits at an endpoint.
inline double worst_case_residual(double f, double R, double dR, double df) {
    double lo = f - (R - dR - df);
    double hi = f - (R + dR + df);
    return std::max(lo * lo, hi * hi);
}

inline double worst_case_residual(const Eigen::VectorXd& p, const SurrogateSet& s,
                                  const ReferenceSet& ref, const std::string& id, int bin) {
    std::size_t i = ref.index.at(id);
    const auto& o = ref.observables[i];
    BinEval e = eval_bin(s, s.flat_index(i, bin), p);
    return worst_case_residual(e.value, o.values[bin], o.uncertainties[bin], e.uncertainty);
}

namespace detail {

// Per-observable totals T_O = sum_b t_b over kept bins, plus kept bin counts.
struct RobustTotals {
    std::vector<std::string> ids;
    std::vector<double> t_sum;
    std::vector<int> bins;
};

inline RobustTotals robust_totals(const Eigen::VectorXd& p, const SurrogateSet& s,
                                  const ReferenceSet& ref, const FilterMask& mask) {
    RobustTotals tot;
    Eigen::VectorXd x = s.scaling.to_unit(p);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        if (mask.observable_excluded(o.id)) continue;
        double acc = 0.0;
        int n = 0;
        for (int b = 0; b < o.bins(); ++b) {
            if (!mask.bin_included(o.id, b)) continue;
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            double f = eval_model(s.value_models[k], x, where);
            double df = std::max(0.0, eval_model(s.unc_models[k], x, where));
            acc += worst_case_residual(f, o.values[b], o.uncertainties[b], df);
            ++n;
        }
        if (n == 0) continue;
        tot.ids.push_back(o.id);
        tot.t_sum.push_back(acc);
        tot.bins.push_back(n);
    }
    return tot;
}

} // namespace detail

// For fixed p the weight problem is an LP; its optimum is the fractional
// knapsack: raise w_O to 1 in ascending order of T_O (objective cost per
// unit of constraint contribution), with a fractional last weight meeting
// the mu constraint with equality. mu = 100 forces all weights to 1.
inline WeightVector optimal_weights_for_p(const Eigen::VectorXd& p, const SurrogateSet& s,
                                          const ReferenceSet& ref, double mu,
                                          const FilterMask& mask = {}) {
    if (!(mu > 0.0 && mu <= 100.0)) throw TuneError("mu must be in (0, 100]");
    auto tot = detail::robust_totals(p, s, ref, mask);
    std::size_t n = tot.ids.size();
    if (n == 0) throw TuneError("robust weights: no observables left after masking");

    double budget = 0.0; // (mu/100) * sum 1/|O|
    for (std::size_t i = 0; i < n; ++i) budget += 1.0 / tot.bins[i];
    budget *= mu / 100.0;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return tot.t_sum[a] < tot.t_sum[b]; });

    WeightVector w;
    for (std::size_t i = 0; i < n; ++i) w.weights[tot.ids[i]] = 0.0;
    double have = 0.0;
    for (std::size_t idx : order) {
        double cap = 1.0 / tot.bins[idx]; // constraint contribution of w = 1
        if (have + cap <= budget - 1e-15) {
            w.weights[tot.ids[idx]] = 1.0;
            have += cap;
        } else {
            double frac = std::clamp((budget - have) / cap, 0.0, 1.0);
            w.weights[tot.ids[idx]] = frac;
            have += frac * cap;
            break;
        }
    }
    // mu = 100 must saturate every weight (guards rounding of the budget)
    if (mu >= 100.0)
        for (auto& [id, v] : w.weights) v = 1.0;
    return w;
}

// Reduced robust objective F(p) = sum_O (w_O(p)/|O|) sum_b t_b(p).
inline double robust_objective(const Eigen::VectorXd& p, const SurrogateSet& s,
                               const ReferenceSet& ref, double mu, const FilterMask& mask = {}) {
    auto tot = detail::robust_totals(p, s, ref, mask);
    WeightVector w = optimal_weights_for_p(p, s, ref, mu, mask);
    double acc = 0.0;
    for (std::size_t i = 0; i < tot.ids.size(); ++i)
        acc += w.at(tot.ids[i]) / tot.bins[i] * tot.t_sum[i];
    return acc;
}

namespace detail {

// Compass (coordinate pattern) search with step halving; nonsmooth-safe.
template <typename F>
inline std::pair<Eigen::VectorXd, double> compass_search(Eigen::VectorXd p, const ParameterSpace& box,
                                                         F&& fn, int max_iter) {
    int d = box.dim();
    Eigen::VectorXd range = box.upper - box.lower;
    Eigen::VectorXd step = 0.25 * range;
    p = box.clamp(std::move(p));
    double fp = fn(p);
    for (int it = 0; it < max_iter; ++it) {
        bool moved = false;
        for (int i = 0; i < d; ++i) {
            for (double sign : {+1.0, -1.0}) {
                Eigen::VectorXd q = p;
                q[i] = std::clamp(q[i] + sign * step[i], box.lower[i], box.upper[i]);
                if (q[i] == p[i]) continue;
                double fq = fn(q);
                if (fq < fp - 1e-15 * (1.0 + std::abs(fp))) {
                    p = q;
                    fp = fq;
                    moved = true;
                }
            }
        }
        if (!moved) {
            step *= 0.5;
            if ((step.array() / range.array()).maxCoeff() < 1e-10) break;
        }
    }
    return {p, fp};
}

} // namespace detail

inline TuneResult solve_robust(const SurrogateSet& s, const ReferenceSet& ref,
                               const FilterMask& mask, const ParameterSpace& box,
                               const RobustConfig& cfg) {
    cfg.validate();
    int d = box.dim();
    Rng rng(cfg.seed);
    std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(cfg.multistarts));
    for (auto& st : starts) {
        st.resize(d);
        for (int i = 0; i < d; ++i) st[i] = rng.uniform(box.lower[i], box.upper[i]);
    }
    auto fn = [&](const Eigen::VectorXd& p) { return robust_objective(p, s, ref, cfg.mu, mask); };

    std::vector<std::pair<Eigen::VectorXd, double>> results(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        results[i] = detail::compass_search(starts[i], box, fn, cfg.max_iterations);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].second < results[best].second) best = i;

    TuneResult res;
    res.method = TuneMethod::Robust;
    res.p_star = results[best].first;
    res.objective_value = results[best].second;
    res.weights = normalize_weights(optimal_weights_for_p(res.p_star, s, ref, cfg.mu, mask));
    res.mask = mask;
    res.seed = cfg.seed;
    res.metadata["mu"] = std::to_string(cfg.mu);
    res.metadata["cdf_statistic"] = "per-observable bin-averaged chi2 (single |O| division)";
    return res;
}

// --- mu selection via cumulative density curves -------------------------

inline std::vector<double> default_tau_grid(int n = 200, double lo = 1e-3, double hi = 1e3) {
    std::vector<double> taus(static_cast<std::size_t>(n));
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i)
        taus[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1.0));
    return taus;
}

inline CdfCurve cdf_curve(const Eigen::VectorXd& p, const SurrogateSet& s, const ReferenceSet& ref,
                          const std::vector<double>& taus, const FilterMask& mask = {}) {
    std::vector<double> stats;
    for (const auto& o : ref.observables) {
        if (mask.observable_excluded(o.id)) continue;
        stats.push_back(per_observable_chi2(p, s, ref, o.id, mask));
    }
    CdfCurve curve;
    curve.taus = taus;
    std::sort(curve.taus.begin(), curve.taus.end());
    for (double tau : curve.taus) {
        int c = 0;
        for (double st : stats)
            if (st <= tau) ++c;
        curve.counts.push_back(c);
    }
    return curve;
}

// Ideal curve: each observable's statistic uses its own ideal tune.
inline CdfCurve ideal_cdf_curve(const IdealTuneTable& ideal, const std::vector<double>& taus) {
    CdfCurve curve;
    curve.taus = taus;
    std::sort(curve.taus.begin(), curve.taus.end());
    for (double tau : curve.taus) {
        int c = 0;
        for (const auto& e : ideal)
            if (e.chi_ideal <= tau) ++c;
        curve.counts.push_back(c);
    }
    return curve;
}

// Trapezoidal area between two count curves over the shared tau grid.
inline double area_between(const CdfCurve& run, const CdfCurve& ideal) {
    if (run.taus != ideal.taus) throw TuneError("cdf area: tau grids differ");
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < run.taus.size(); ++i) {
        double a = std::abs(ideal.counts[i] - run.counts[i]);
        double b = std::abs(ideal.counts[i + 1] - run.counts[i + 1]);
        area += 0.5 * (a + b) * (run.taus[i + 1] - run.taus[i]);
    }
    return area;
}

struct MuSweepResult {
    double best_mu = 0.0;
    std::size_t best_index = 0;
    std::vector<TuneResult> results;
    std::vector<double> areas;
};

// Independent robust runs over a list of mu values; the winner has the
// smallest area to the ideal curve, ties broken by smaller mu.
inline MuSweepResult sweep_mu(const SurrogateSet& s, const ReferenceSet& ref,
                              const FilterMask& mask, const ParameterSpace& box,
                              const std::vector<double>& mus, const RobustConfig& base_cfg,
                              const IdealTuneTable& ideal,
                              const std::vector<double>& taus = default_tau_grid()) {
    if (mus.empty()) throw TuneError("mu sweep: empty mu list");
    MuSweepResult out;
    out.results.resize(mus.size());
    out.areas.resize(mus.size());
    CdfCurve ideal_curve = ideal_cdf_curve(ideal, taus);
    parallel_for(mus.size(), [&](std::size_t i) {
        RobustConfig cfg = base_cfg;
        cfg.mu = mus[i];
        out.results[i] = solve_robust(s, ref, mask, box, cfg);
        CdfCurve curve = cdf_curve(out.results[i].p_star, s, ref, taus, mask);
        out.areas[i] = area_between(curve, ideal_curve);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < mus.size(); ++i) {
        if (out.areas[i] < out.areas[best] ||
            (out.areas[i] == out.areas[best] && mus[i] < mus[best]))
            best = i;
    }
    out.best_index = best;
    out.best_mu = mus[best];
    return out;
}

} // namespace tunekit
