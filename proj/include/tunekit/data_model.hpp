#pragma once

// Domain types shared by every stage of the tuning pipeline: parameter
// space, reference histograms, MC run grids, weight vectors, filter masks,
// and tune results. All types are immutable after construction and safe to
// share read-only across workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/common.hpp"

namespace tunekit {

struct ParameterSpace {
    std::vector<std::string> names;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    int dim() const { return static_cast<int>(names.size()); }

    void validate() const {
        if (names.empty()) throw TuneError("parameter space: no parameters");
        if (lower.size() != dim() || upper.size() != dim())
            throw TuneError("parameter space: bound/name length mismatch");
        std::set<std::string> seen;
        for (const auto& n : names)
            if (!seen.insert(n).second)
                throw TuneError("parameter space: duplicate name '" + n + "'");
        for (int i = 0; i < dim(); ++i)
            if (!(lower[i] < upper[i]))
                throw TuneError("parameter space: lower >= upper for '" + names[i] + "'");
    }

    bool contains(const Eigen::VectorXd& p, double tol = 1e-12) const {
        for (int i = 0; i < dim(); ++i)
            if (p[i] < lower[i] - tol || p[i] > upper[i] + tol) return false;
        return true;
    }

    Eigen::VectorXd clamp(Eigen::VectorXd p) const {
        for (int i = 0; i < dim(); ++i) p[i] = std::clamp(p[i], lower[i], upper[i]);
        return p;
    }
};

struct Observable {
    std::string id;
    std::optional<std::string> group;
    Eigen::VectorXd values;        // R_b
    Eigen::VectorXd uncertainties; // dR_b, strictly positive

    int bins() const { return static_cast<int>(values.size()); }

    void validate() const {
        if (values.size() == 0) throw TuneError("observable '" + id + "': no bins");
        if (uncertainties.size() != values.size())
            throw TuneError("observable '" + id + "': value/uncertainty length mismatch");
        for (int b = 0; b < bins(); ++b)
            if (!(uncertainties[b] > 0.0))
                throw TuneError("observable '" + id + "': non-positive uncertainty in bin " +
                                std::to_string(b + 1));
    }
};

struct ReferenceSet {
    std::vector<Observable> observables;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t size() const { return observables.size(); }

    int total_bins() const {
        int n = 0;
        for (const auto& o : observables) n += o.bins();
        return n;
    }

    const Observable& at(const std::string& id) const {
        auto it = index.find(id);
        if (it == index.end()) throw TuneError("unknown observable '" + id + "'");
        return observables[it->second];
    }

    void rebuild_index() {
        index.clear();
        for (std::size_t i = 0; i < observables.size(); ++i) {
            if (!index.emplace(observables[i].id, i).second)
                throw TuneError("duplicate observable id '" + observables[i].id + "'");
        }
    }

    void validate() const {
        if (observables.empty()) throw TuneError("no observables");
        for (const auto& o : observables) o.validate();
    }
};

struct MCRunGrid {
    ParameterSpace space;
    Eigen::MatrixXd points; // n_runs x d
    // Aligned with ReferenceSet order: one matrix (n_runs x bins) per observable.
    std::vector<Eigen::MatrixXd> values;        // MC_b(p_i)
    std::vector<Eigen::MatrixXd> uncertainties; // dMC_b(p_i)

    int runs() const { return static_cast<int>(points.rows()); }

    void validate(const ReferenceSet& ref) const {
        space.validate();
        if (points.rows() < 1) throw TuneError("mc grid: fewer runs than 1");
        if (points.cols() != space.dim()) throw TuneError("mc grid: point dimension mismatch");
        for (int r = 0; r < runs(); ++r)
            if (!space.contains(points.row(r).transpose()))
                throw TuneError("mc grid: run " + std::to_string(r + 1) + " outside bounds");
        if (values.size() != ref.size() || uncertainties.size() != ref.size())
            throw TuneError("mc grid: observable count mismatch vs reference");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto& o = ref.observables[i];
            if (values[i].rows() != runs() || values[i].cols() != o.bins() ||
                uncertainties[i].rows() != runs() || uncertainties[i].cols() != o.bins())
                throw TuneError("mc grid: shape mismatch for observable '" + o.id + "'");
        }
    }
};

struct WeightVector {
    std::map<std::string, double> weights;

    double sum() const {
        double s = 0.0;
        for (const auto& [id, w] : weights) s += w;
        return s;
    }

    double at(const std::string& id) const {
        auto it = weights.find(id);
        return it == weights.end() ? 0.0 : it->second;
    }

    void validate() const {
        for (const auto& [id, w] : weights)
            if (w < 0.0) throw TuneError("negative weight for '" + id + "'");
    }
};

inline WeightVector normalize_weights(const WeightVector& w) {
    w.validate();
    double s = w.sum();
    if (!(s > 0.0)) throw TuneError("trivial solution: all weights zero");
    WeightVector out;
    for (const auto& [id, v] : w.weights) out.weights[id] = v / s;
    return out;
}

// 1-based inclusive kept-bin range.
struct BinRange {
    int start = 1;
    int end = 1;
};

struct FilterMask {
    std::set<std::string> excluded_observables;
    std::map<std::string, BinRange> kept_bin_range;

    bool observable_excluded(const std::string& id) const {
        return excluded_observables.count(id) != 0;
    }

    // b is 0-based here; kept ranges are stored 1-based.
    bool bin_included(const std::string& id, int b) const {
        if (observable_excluded(id)) return false;
        auto it = kept_bin_range.find(id);
        if (it == kept_bin_range.end()) return true;
        return b + 1 >= it->second.start && b + 1 <= it->second.end;
    }

    void validate(const ReferenceSet& ref) const {
        for (const auto& id : excluded_observables) {
            ref.at(id);
            if (kept_bin_range.count(id))
                throw TuneError("mask: excluded observable '" + id + "' has a bin range");
        }
        for (const auto& [id, r] : kept_bin_range) {
            const auto& o = ref.at(id);
            if (r.start < 1 || r.end > o.bins() || r.start > r.end)
                throw TuneError("mask: bad bin range for '" + id + "'");
        }
    }
};

enum class TuneMethod {
    BilevelPortfolio,
    BilevelMeanscore,
    BilevelMedianscore,
    Robust,
    AllWeightsEqual,
};

inline std::string to_string(TuneMethod m) {
    switch (m) {
    case TuneMethod::BilevelPortfolio: return "bilevel-portfolio";
    case TuneMethod::BilevelMeanscore: return "bilevel-meanscore";
    case TuneMethod::BilevelMedianscore: return "bilevel-medianscore";
    case TuneMethod::Robust: return "robust";
    case TuneMethod::AllWeightsEqual: return "all-weights-equal";
    }
    throw TuneError("bad method enum");
}

inline TuneMethod method_from_string(const std::string& s) {
    if (s == "bilevel-portfolio") return TuneMethod::BilevelPortfolio;
    if (s == "bilevel-meanscore") return TuneMethod::BilevelMeanscore;
    if (s == "bilevel-medianscore") return TuneMethod::BilevelMedianscore;
    if (s == "robust") return TuneMethod::Robust;
    if (s == "all-weights-equal") return TuneMethod::AllWeightsEqual;
    throw TuneError("unknown method '" + s + "'");
}

struct TuneResult {
    TuneMethod method = TuneMethod::AllWeightsEqual;
    WeightVector weights; // normalized
    Eigen::VectorXd p_star;
    double objective_value = 0.0;
    std::vector<std::pair<WeightVector, double>> history;
    FilterMask mask;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> metadata;
};

} // namespace tunekit
