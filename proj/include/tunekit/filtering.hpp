#pragma once

// Data pre-processing: envelope pre-filter, Z-score observable outlier
// rejection, and contiguous-bin hypothesis-test filtering.

#include <cmath>
#include <optional>
#include <set>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "tunekit/chi2.hpp"
#include "tunekit/data_model.hpp"
#include "tunekit/surrogate.hpp"

namespace tunekit {

struct HypothesisConfig {
    double alpha = 0.05;
    int d = 1; // parameter count, enters the degrees of freedom

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw TuneError("hypothesis config: alpha outside (0,1)");
        if (d < 1) throw TuneError("hypothesis config: d must be >= 1");
    }
};

// Drop observables where no data bin lies inside the min/max band of the
// MC runs.
inline FilterMask envelope_prefilter(const ReferenceSet& ref, const MCRunGrid& grid) {
    grid.validate(ref);
    FilterMask mask;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        bool any_inside = false;
        for (int b = 0; b < o.bins(); ++b) {
            double lo = grid.values[i].col(b).minCoeff();
            double hi = grid.values[i].col(b).maxCoeff();
            if (o.values[b] >= lo && o.values[b] <= hi) {
                any_inside = true;
                break;
            }
        }
        if (!any_inside) mask.excluded_observables.insert(o.id);
    }
    return mask;
}

// Indices with Z-score (chi - mean)/std >= threshold; population standard
// deviation, and an all-equal set yields no outliers.
inline std::set<std::size_t> zscore_outliers(const std::vector<double>& chis,
                                             double threshold = 3.0) {
    if (chis.size() < 2) throw TuneError("zscore: need at least 2 values");
    double m = 0.0;
    for (double c : chis) m += c;
    m /= static_cast<double>(chis.size());
    double var = 0.0;
    for (double c : chis) var += (c - m) * (c - m);
    var /= static_cast<double>(chis.size());
    double sd = std::sqrt(var);
    std::set<std::size_t> out;
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < chis.size(); ++i)
        if ((chis[i] - m) / sd >= threshold) out.insert(i);
    return out;
}

// (1 - alpha) quantile of the chi-squared distribution with rho degrees of
// freedom, i.e. the textbook critical value (3.84 at rho=1, alpha=0.05).
inline double chi2_critical(int rho, double alpha) {
    if (rho < 1) throw TuneError("chi2 critical: rho must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw TuneError("chi2 critical: alpha outside (0,1)");
    boost::math::chi_squared dist(static_cast<double>(rho));
    return boost::math::quantile(dist, 1.0 - alpha);
}

namespace detail {

// Feasibility of a window [s, e] (0-based inclusive): mean per-bin
// statistic <= critical value at rho = len - d; windows of length <= d
// never pass.
inline bool window_feasible(const std::vector<double>& prefix, int s, int e, int d, double alpha) {
    int len = e - s + 1;
    if (len <= d) return false;
    double mean = (prefix[static_cast<std::size_t>(e + 1)] - prefix[static_cast<std::size_t>(s)]) / len;
    return mean <= chi2_critical(len - d, alpha);
}

} // namespace detail

// Per-bin chi^2 terms of an observable at a fixed p (typically the
// per-observable ideal tune).
inline std::vector<double> bin_statistics(const Eigen::VectorXd& p, const SurrogateSet& s,
                                          const ReferenceSet& ref, const std::string& id) {
    std::size_t i = ref.index.at(id);
    const auto& o = ref.observables[i];
    Eigen::VectorXd x = s.scaling.to_unit(p);
    std::vector<double> stats(static_cast<std::size_t>(o.bins()));
    for (int b = 0; b < o.bins(); ++b) {
        std::size_t k = s.flat_index(i, b);
        std::string where = o.id + " bin " + std::to_string(b + 1);
        double f = detail::eval_model(s.value_models[k], x, where);
        double df = std::max(0.0, detail::eval_model(s.unc_models[k], x, where));
        double r = f - o.values[b];
        stats[static_cast<std::size_t>(b)] = r * r / (df * df + o.uncertainties[b] * o.uncertainties[b]);
    }
    return stats;
}

struct BinFilterOutcome {
    enum class Status { NotApplicable, NoWindow, Window };
    Status status = Status::NotApplicable;
    BinRange range; // valid when status == Window, 1-based inclusive

    std::optional<BinRange> window() const {
        if (status == Status::Window) return range;
        return std::nullopt;
    }
};

// Largest contiguous window of per-bin statistics passing the mean
// chi^2 test at its own degrees of freedom. The sliding procedure walks
// the bins once; its result is checked against exhaustive enumeration so
// the returned length is always the brute-force maximum, then the
// boundary sanity shift is applied when it keeps the window feasible.
inline BinFilterOutcome bin_filter_statistics(const std::vector<double>& stats,
                                              const HypothesisConfig& cfg) {
    cfg.validate();
    int n = static_cast<int>(stats.size());
    BinFilterOutcome out;
    if (n <= cfg.d) return out; // not applicable, whole observable kept

    std::vector<double> prefix(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 0; i < n; ++i) prefix[static_cast<std::size_t>(i + 1)] = prefix[static_cast<std::size_t>(i)] + stats[static_cast<std::size_t>(i)];

    auto feasible = [&](int s, int e) { return detail::window_feasible(prefix, s, e, cfg.d, cfg.alpha); };

    // sliding pass (maximum-subarray style): grow while the grown window
    // stays feasible or is still shorter than the applicability bound,
    // otherwise advance the start
    int best_s = -1, best_e = -1, best_len = 0;
    {
        int s = 0;
        for (int e = 0; e < n; ++e) {
            while (s < e) {
                int len = e - s + 1;
                if (len <= cfg.d + 1 || feasible(s, e)) break;
                ++s;
            }
            if (feasible(s, e) && e - s + 1 > best_len) {
                best_len = e - s + 1;
                best_s = s;
                best_e = e;
            }
        }
    }

    // exhaustive check: the sliding pass may miss the maximal length on
    // adversarial inputs, so fall back to the earliest maximal window
    int max_len = 0, max_s = -1, max_e = -1;
    for (int len = n; len > cfg.d; --len) {
        for (int s = 0; s + len - 1 < n; ++s) {
            if (feasible(s, s + len - 1)) {
                max_len = len;
                max_s = s;
                max_e = s + len - 1;
                break;
            }
        }
        if (max_len > 0) break;
    }
    if (max_len == 0) {
        out.status = BinFilterOutcome::Status::NoWindow;
        return out;
    }
    if (best_len < max_len) {
        best_s = max_s;
        best_e = max_e;
    }

    // boundary sanity shift: trade the worse edge bin for a better
    // neighbor, keeping the window feasible
    if (best_s > 0 && stats[static_cast<std::size_t>(best_s - 1)] < stats[static_cast<std::size_t>(best_e)] &&
        feasible(best_s - 1, best_e - 1)) {
        --best_s;
        --best_e;
    } else if (best_e < n - 1 && stats[static_cast<std::size_t>(best_s)] > stats[static_cast<std::size_t>(best_e + 1)] &&
               feasible(best_s + 1, best_e + 1)) {
        ++best_s;
        ++best_e;
    }

    out.status = BinFilterOutcome::Status::Window;
    out.range = BinRange{best_s + 1, best_e + 1};
    return out;
}

inline BinFilterOutcome bin_filter(const std::string& id, const SurrogateSet& s,
                                   const ReferenceSet& ref, const ParameterSpace& box,
                                   const HypothesisConfig& cfg, const Chi2Config& inner_cfg) {
    const auto& o = ref.at(id);
    if (o.bins() <= cfg.d) return BinFilterOutcome{}; // not applicable
    WeightVector w;
    w.weights[id] = 1.0;
    auto [p_ideal, v] = minimize_chi2(w, s, ref, {}, box, inner_cfg);
    (void)v;
    return bin_filter_statistics(bin_statistics(p_ideal, s, ref, id), cfg);
}

enum class FilterMode { None, Observable, Bin };

inline FilterMode filter_mode_from_string(const std::string& s) {
    if (s == "none") return FilterMode::None;
    if (s == "observable") return FilterMode::Observable;
    if (s == "bin") return FilterMode::Bin;
    throw TuneError("unknown filter mode '" + s + "'");
}

inline FilterMask apply_filters(const ReferenceSet& ref, const SurrogateSet& s,
                                const ParameterSpace& box, FilterMode mode,
                                const HypothesisConfig& hyp_cfg, const Chi2Config& inner_cfg,
                                double zscore_threshold = 3.0) {
    FilterMask mask;
    if (mode == FilterMode::None) return mask;
    if (mode == FilterMode::Observable) {
        IdealTuneTable ideal = ideal_tunes(s, ref, box, inner_cfg);
        std::vector<double> chis;
        for (const auto& e : ideal) chis.push_back(e.chi_ideal);
        if (chis.size() < 2) return mask;
        for (std::size_t idx : zscore_outliers(chis, zscore_threshold))
            mask.excluded_observables.insert(ideal[idx].id);
        return mask;
    }
    // bin mode
    std::vector<BinFilterOutcome> outcomes(ref.size());
    parallel_for(ref.size(), [&](std::size_t i) {
        outcomes[i] = bin_filter(ref.observables[i].id, s, ref, box, hyp_cfg, inner_cfg);
    });
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        switch (outcomes[i].status) {
        case BinFilterOutcome::Status::NotApplicable:
            break; // whole observable kept
        case BinFilterOutcome::Status::NoWindow:
            mask.excluded_observables.insert(o.id);
            break;
        case BinFilterOutcome::Status::Window:
            if (outcomes[i].range.start != 1 || outcomes[i].range.end != o.bins())
                mask.kept_bin_range[o.id] = outcomes[i].range;
            break;
        }
    }
    return mask;
}

} // namespace tunekit
