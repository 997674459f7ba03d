#pragma once

// Tune-quality metrics: weighted chi^2, posterior covariance with A-/D-
// optimality summaries, ellipsoid coverage, and eigentune intervals.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "tunekit/chi2.hpp"
#include "tunekit/data_model.hpp"
#include "tunekit/surrogate.hpp"

namespace tunekit {

struct PosteriorCovariance {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::MatrixXd eigenvectors; // columns, aligned with eigenvalues
};

struct Eigentune {
    std::vector<std::pair<double, double>> intervals; // per parameter (min, max)
    double n_effective = 0.0;
    double gamma = 0.01;
};

// Gamma_post = (sum_O w_O F_O^T Gamma_noise^-1 F_O)^-1 with F_O the per-bin
// gradient rows of f at p_hat and Gamma_noise diagonal df^2 + dR^2 frozen
// at p_hat. Weights must be normalized.
inline PosteriorCovariance gamma_post(const Eigen::VectorXd& p_hat, const WeightVector& w,
                                      const SurrogateSet& s, const ReferenceSet& ref,
                                      const FilterMask& mask = {}) {
    if (std::abs(w.sum() - 1.0) > 1e-9) throw TuneError("gamma_post: weights must be normalized");
    int d = static_cast<int>(p_hat.size());
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x = s.scaling.to_unit(p_hat);
    Eigen::VectorXd jac = s.scaling.jacobian_diag();
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const auto& o = ref.observables[i];
        double wo = w.at(o.id);
        if (wo == 0.0 || mask.observable_excluded(o.id)) continue;
        for (int b = 0; b < o.bins(); ++b) {
            if (!mask.bin_included(o.id, b)) continue;
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            Eigen::VectorXd gf = detail::eval_model_grad(s.value_models[k], x, where).cwiseProduct(jac);
            double df = std::max(0.0, detail::eval_model(s.unc_models[k], x, where));
            double noise = df * df + o.uncertainties[b] * o.uncertainties[b];
            info += (wo / noise) * (gf * gf.transpose());
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(info);
    if (!lu.isInvertible())
        throw TuneError("gamma_post: information matrix singular; parameters unidentifiable at p_hat");
    PosteriorCovariance out;
    out.matrix = lu.inverse();
    out.matrix = 0.5 * (out.matrix + out.matrix.transpose()); // symmetrize roundoff
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix);
    out.eigenvalues = eig.eigenvalues();
    out.eigenvectors = eig.eigenvectors();
    return out;
}

inline double weighted_chi2_metric(const TuneResult& result, const SurrogateSet& s,
                                   const ReferenceSet& ref) {
    return chi2(result.p_star, normalize_weights(result.weights), s, ref, result.mask);
}

inline double a_optimality(const PosteriorCovariance& g) { return g.matrix.trace(); }

inline double d_optimality_log(const PosteriorCovariance& g) {
    double acc = 0.0;
    for (int i = 0; i < g.eigenvalues.size(); ++i) {
        if (!(g.eigenvalues[i] > 0.0))
            throw TuneError("d-optimality: non-positive eigenvalue");
        acc += std::log(g.eigenvalues[i]);
    }
    return acc;
}

// s = ||L^T (p - p_hat)||_2 with L the Cholesky factor of Gamma_post;
// s < 1 means p lies inside the unit confidence ellipsoid.
inline double ellipsoid_coverage(const Eigen::VectorXd& p, const Eigen::VectorXd& p_hat,
                                 const PosteriorCovariance& g) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.matrix);
    if (llt.info() != Eigen::Success)
        throw TuneError("ellipsoid coverage: covariance not positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    return (L.transpose() * (p - p_hat)).norm();
}

// Scaled effective sample size n = gamma ((sum w)^2 / sum w^2 - d) for
// normalized weights.
inline double effective_n(const WeightVector& w, int d, double gamma = 0.01) {
    double sum = 0.0, sum2 = 0.0;
    for (const auto& [id, v] : w.weights) {
        sum += v;
        sum2 += v * v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw TuneError("effective_n: weights must be normalized");
    double n = gamma * (sum * sum / sum2 - d);
    if (gamma > 0.0 && n <= 0.0)
        throw TuneError("too few effective observables for eigentunes (n <= 0)");
    return n;
}

namespace detail {

// Solve chi2(p_hat + alpha u) = chi2(p_hat) + n for alpha > 0 by geometric
// bracket growth followed by bisection.
template <typename F>
inline double solve_offset(F&& chi2_at, double base, double n, double bracket_limit,
                           const std::string& direction_name) {
    double target = base + n;
    double lo = 0.0, hi = 1e-3;
    double fhi = chi2_at(hi);
    while (fhi < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > bracket_limit)
            throw TuneError("eigentune: flat direction, no bracket found along " + direction_name);
        fhi = chi2_at(hi);
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double fmid = chi2_at(mid);
        if (std::abs(fmid - target) <= 1e-6 * (1.0 + n)) return mid;
        if (fmid < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

// Displace p_hat along the eigenvectors of Gamma_post with the largest and
// smallest eigenvalues until chi^2 rises by n; intervals are per-parameter
// min/max over the four displaced points, negatives clamped to 0.
inline Eigentune eigentune(const Eigen::VectorXd& p_hat, const WeightVector& w,
                           const SurrogateSet& s, const ReferenceSet& ref,
                           const ParameterSpace& box, double n, double gamma = 0.01,
                           const FilterMask& mask = {}) {
    if (!(n > 0.0)) throw TuneError("eigentune: n must be positive");
    WeightVector wn = normalize_weights(w);
    PosteriorCovariance g = gamma_post(p_hat, wn, s, ref, mask);
    int d = static_cast<int>(p_hat.size());
    double base = chi2(p_hat, wn, s, ref, mask);
    double bracket_limit = 1e3 * (box.upper - box.lower).norm();

    std::vector<Eigen::VectorXd> dirs;
    dirs.push_back(g.eigenvectors.col(d - 1)); // largest eigenvalue
    if (d > 1) dirs.push_back(g.eigenvectors.col(0)); // smallest eigenvalue

    std::vector<Eigen::VectorXd> displaced;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        for (double sign : {+1.0, -1.0}) {
            Eigen::VectorXd u = sign * dirs[k];
            auto chi2_at = [&](double a) { return chi2(p_hat + a * u, wn, s, ref, mask); };
            std::string name = "eigenvector " + std::to_string(k + 1) +
                               (sign > 0 ? " (+)" : " (-)");
            double alpha = detail::solve_offset(chi2_at, base, n, bracket_limit, name);
            displaced.push_back(p_hat + alpha * u);
        }
    }

    Eigentune out;
    out.n_effective = n;
    out.gamma = gamma;
    out.intervals.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        double mn = std::numeric_limits<double>::infinity();
        double mx = -std::numeric_limits<double>::infinity();
        for (const auto& q : displaced) {
            mn = std::min(mn, q[i]);
            mx = std::max(mx, q[i]);
        }
        mn = std::max(0.0, mn); // negative interval edges clamp to zero
        mx = std::max(0.0, mx);
        out.intervals[static_cast<std::size_t>(i)] = {mn, mx};
    }
    return out;
}

} // namespace tunekit
