#pragma once

// Weighted chi^2 objectives over the surrogate, analytic gradients, the
// multistart bound-constrained inner optimizer, and per-observable ideal
// tunes.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/data_model.hpp"
#include "tunekit/surrogate.hpp"

namespace tunekit {

struct Chi2Config {
    int multistarts = 100;
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (multistarts < 1) throw TuneError("chi2 config: multistarts must be >= 1");
        if (max_iterations < 1) throw TuneError("chi2 config: max_iterations must be >= 1");
    }
};

struct IdealTuneEntry {
    std::string id;
    Eigen::VectorXd p_ideal;
    double chi_ideal = 0.0;
};

using IdealTuneTable = std::vector<IdealTuneEntry>;

// chi^2(p, w) = sum_O w_O sum_b (f_b - R_b)^2 / (df_b^2 + dR_b^2),
// restricted to bins the mask keeps.
inline double chi2(const Eigen::VectorXd& p, const WeightVector& w, const SurrogateSet& s,
                   const ReferenceSet& ref, const FilterMask& mask = {}) {
    Eigen::VectorXd x = s.scaling.to_unit(p);
    double total = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        double wo = w.at(o.id);
        if (wo == 0.0 || mask.observable_excluded(o.id)) continue;
        double acc = 0.0;
        for (int b = 0; b < o.bins(); ++b) {
            if (!mask.bin_included(o.id, b)) continue;
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            double f = detail::eval_model(s.value_models[k], x, where);
            double df = std::max(0.0, detail::eval_model(s.unc_models[k], x, where));
            double r = f - o.values[b];
            acc += r * r / (df * df + o.uncertainties[b] * o.uncertainties[b]);
        }
        total += wo * acc;
    }
    return total;
}

// Full quotient-rule gradient, including the p-dependence of df_b in the
// denominator (zero where the df clamp is active).
inline Eigen::VectorXd chi2_gradient(const Eigen::VectorXd& p, const WeightVector& w,
                                     const SurrogateSet& s, const ReferenceSet& ref,
                                     const FilterMask& mask = {}) {
    Eigen::VectorXd x = s.scaling.to_unit(p);
    Eigen::VectorXd jac = s.scaling.jacobian_diag();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        double wo = w.at(o.id);
        if (wo == 0.0 || mask.observable_excluded(o.id)) continue;
        for (int b = 0; b < o.bins(); ++b) {
            if (!mask.bin_included(o.id, b)) continue;
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            double f = detail::eval_model(s.value_models[k], x, where);
            double u = detail::eval_model(s.unc_models[k], x, where);
            double df = std::max(0.0, u);
            double denom = df * df + o.uncertainties[b] * o.uncertainties[b];
            double r = f - o.values[b];
            Eigen::VectorXd gf = detail::eval_model_grad(s.value_models[k], x, where).cwiseProduct(jac);
            g += wo * (2.0 * r / denom) * gf;
            if (u > 0.0) {
                Eigen::VectorXd gu =
                    detail::eval_model_grad(s.unc_models[k], x, where).cwiseProduct(jac);
                g -= wo * (r * r / (denom * denom)) * (2.0 * df) * gu;
            }
        }
    }
    return g;
}

// Eq-form per-observable statistic: bin-averaged chi^2 with unit weight.
inline double per_observable_chi2(const Eigen::VectorXd& p, const SurrogateSet& s,
                                  const ReferenceSet& ref, const std::string& id,
                                  const FilterMask& mask = {}) {
    std::size_t i = ref.index.at(id);
    const auto& o = ref.observables[i];
    Eigen::VectorXd x = s.scaling.to_unit(p);
    double acc = 0.0;
    int n = 0;
    for (int b = 0; b < o.bins(); ++b) {
        if (!mask.bin_included(o.id, b)) continue;
        std::size_t k = s.flat_index(i, b);
        std::string where = o.id + " bin " + std::to_string(b + 1);
        double f = detail::eval_model(s.value_models[k], x, where);
        double df = std::max(0.0, detail::eval_model(s.unc_models[k], x, where));
        double r = f - o.values[b];
        acc += r * r / (df * df + o.uncertainties[b] * o.uncertainties[b]);
        ++n;
    }
    if (n == 0) return 0.0;
    return acc / n;
}

namespace detail {

// Projected gradient descent with Barzilai-Borwein steps and Armijo
// backtracking. Converges when the unit-step gradient mapping drops below
// tol or the iteration cap is hit.
template <typename F, typename G>
inline std::pair<Eigen::VectorXd, double>
projected_descent(Eigen::VectorXd p, const ParameterSpace& box, F&& fn, G&& grad, int max_iter,
                  double tol) {
    auto project = [&](Eigen::VectorXd q) { return box.clamp(std::move(q)); };
    p = project(p);
    double fp = fn(p);
    Eigen::VectorXd g = grad(p);
    double step = 1.0;
    Eigen::VectorXd p_prev = p, g_prev = g;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd mapped = p - project(p - g);
        if (mapped.norm() <= tol) break;
        // Armijo backtracking along the projected path
        double t = step;
        Eigen::VectorXd cand;
        double fc = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            cand = project(p - t * g);
            Eigen::VectorXd d = cand - p;
            if (d.norm() == 0.0) break;
            fc = fn(cand);
            if (fc <= fp + 1e-4 * g.dot(d)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        p_prev = p;
        g_prev = g;
        p = cand;
        fp = fc;
        g = grad(p);
        // BB1 step for the next iteration
        Eigen::VectorXd sv = p - p_prev;
        Eigen::VectorXd yv = g - g_prev;
        double sy = sv.dot(yv);
        step = (sy > 1e-300) ? sv.squaredNorm() / sy : 1.0;
        step = std::clamp(step, 1e-12, 1e12);
    }
    return {p, fp};
}

} // namespace detail

// Inner problem: best chi^2 over cfg.multistarts uniform starts in the box.
// Deterministic given cfg.seed; ties broken by smallest start index.
inline std::pair<Eigen::VectorXd, double>
minimize_chi2(const WeightVector& w, const SurrogateSet& s, const ReferenceSet& ref,
              const FilterMask& mask, const ParameterSpace& box, const Chi2Config& cfg) {
    cfg.validate();
    int d = box.dim();
    Rng rng(cfg.seed);
    std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(cfg.multistarts));
    for (auto& st : starts) {
        st.resize(d);
        for (int i = 0; i < d; ++i) st[i] = rng.uniform(box.lower[i], box.upper[i]);
    }
    auto fn = [&](const Eigen::VectorXd& p) { return chi2(p, w, s, ref, mask); };
    auto gr = [&](const Eigen::VectorXd& p) { return chi2_gradient(p, w, s, ref, mask); };

    std::vector<std::optional<std::pair<Eigen::VectorXd, double>>> results(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        try {
            results[i] = detail::projected_descent(starts[i], box, fn, gr, cfg.max_iterations,
                                                   cfg.gradient_tolerance);
        } catch (const PoleError&) {
            results[i] = std::nullopt;
        }
    });
    std::optional<std::pair<Eigen::VectorXd, double>> best;
    for (const auto& r : results) {
        if (!r) continue;
        if (!best || r->second < best->second) best = r;
    }
    if (!best) throw TuneError("inner optimization failed at every start (pole everywhere?)");
    return *best;
}

// Per-observable ideal tunes: minimize the bin-averaged chi^2 of each
// observable separately with the same multistart scheme.
inline IdealTuneTable ideal_tunes(const SurrogateSet& s, const ReferenceSet& ref,
                                  const ParameterSpace& box, const Chi2Config& cfg,
                                  const FilterMask& mask = {}) {
    cfg.validate();
    IdealTuneTable table(ref.size());
    parallel_for(ref.size(), [&](std::size_t i) {
        const auto& o = ref.observables[i];
        WeightVector w;
        w.weights[o.id] = 1.0;
        auto [p, v] = minimize_chi2(w, s, ref, mask, box, cfg);
        (void)v; // argmin of the sum equals argmin of the bin average
        table[i] = IdealTuneEntry{o.id, p, per_observable_chi2(p, s, ref, o.id, mask)};
    });
    return table;
}

} // namespace tunekit
