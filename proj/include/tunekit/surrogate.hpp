#pragma once

// Per-bin analytic models f_b(p), df_b(p) fitted to the MC run grid.
// Polynomial models use the full monomial basis of bounded total degree in
// affinely scaled coordinates; rational models are fitted by linearized
// least squares with optional Sanathanan-Koerner reweighting.

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tunekit/data_model.hpp"

namespace tunekit {

// Exponent tuples of all monomials with total degree <= degree in d
// variables, graded order (degree 0 first, then 1, ...).
inline std::vector<std::vector<int>> monomial_exponents(int dim, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(dim, 0);
    for (int total = 0; total <= degree; ++total) {
        // enumerate compositions of `total` into dim parts, lexicographic
        std::function<void(int, int)> rec = [&](int pos, int remaining) {
            if (pos == dim - 1) {
                cur[pos] = remaining;
                out.push_back(cur);
                return;
            }
            for (int e = remaining; e >= 0; --e) {
                cur[pos] = e;
                rec(pos + 1, remaining - e);
            }
        };
        if (dim == 0) break;
        rec(0, total);
    }
    return out;
}

inline long basis_size(int dim, int degree) {
    // C(dim + degree, degree)
    long n = 1;
    for (int i = 1; i <= degree; ++i) n = n * (dim + i) / i;
    return n;
}

// Affine map of the parameter box onto [-1, 1]^d used to condition the
// design matrix.
struct BoxScaling {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    Eigen::VectorXd to_unit(const Eigen::VectorXd& p) const {
        return (2.0 * (p - lower).array() / (upper - lower).array() - 1.0).matrix();
    }

    // d x_j / d p_j
    Eigen::VectorXd jacobian_diag() const {
        return (2.0 / (upper - lower).array()).matrix();
    }
};

namespace detail {

inline double eval_monomials(const std::vector<std::vector<int>>& exps,
                             const Eigen::VectorXd& coeffs, const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (std::size_t k = 0; k < exps.size(); ++k) {
        double m = coeffs[static_cast<int>(k)];
        if (m == 0.0) continue;
        for (std::size_t j = 0; j < exps[k].size(); ++j)
            for (int e = 0; e < exps[k][j]; ++e) m *= x[static_cast<int>(j)];
        acc += m;
    }
    return acc;
}

// gradient wrt the scaled coordinates x
inline Eigen::VectorXd eval_monomials_grad(const std::vector<std::vector<int>>& exps,
                                           const Eigen::VectorXd& coeffs,
                                           const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    for (std::size_t k = 0; k < exps.size(); ++k) {
        double c = coeffs[static_cast<int>(k)];
        if (c == 0.0) continue;
        for (int j = 0; j < x.size(); ++j) {
            int ej = exps[k][static_cast<std::size_t>(j)];
            if (ej == 0) continue;
            double m = c * ej;
            for (int jj = 0; jj < x.size(); ++jj) {
                int e = exps[k][static_cast<std::size_t>(jj)];
                if (jj == j) e -= 1;
                for (int q = 0; q < e; ++q) m *= x[jj];
            }
            g[j] += m;
        }
    }
    return g;
}

inline Eigen::RowVectorXd design_row(const std::vector<std::vector<int>>& exps,
                                     const Eigen::VectorXd& x) {
    Eigen::RowVectorXd row(static_cast<int>(exps.size()));
    for (std::size_t k = 0; k < exps.size(); ++k) {
        double m = 1.0;
        for (std::size_t j = 0; j < exps[k].size(); ++j)
            for (int e = 0; e < exps[k][j]; ++e) m *= x[static_cast<int>(j)];
        row[static_cast<int>(k)] = m;
    }
    return row;
}

} // namespace detail

struct PolynomialModel {
    int degree = 0;
    Eigen::VectorXd coefficients; // graded monomial order, scaled coordinates
};

struct RationalModel {
    int num_degree = 3;
    int den_degree = 1;
    Eigen::VectorXd num_coefficients;
    // Full denominator coefficient vector with the constant term pinned to 1.
    Eigen::VectorXd den_coefficients;
};

using BinModel = std::variant<PolynomialModel, RationalModel>;

struct BinEval {
    double value = 0.0;
    double uncertainty = 0.0; // clamped to >= 0
};

struct SurrogateSet {
    BoxScaling scaling;
    // Flattened per-bin layout following ReferenceSet order; offsets[i] is
    // the first flat index of observable i.
    std::vector<std::size_t> offsets;
    std::vector<int> bins_per_observable;
    std::vector<BinModel> value_models;
    std::vector<BinModel> unc_models;
    std::vector<std::string> observable_ids;
    std::vector<double> fit_residuals; // in-sample RMS residual of f_b

    std::size_t total_bins() const { return value_models.size(); }

    std::size_t flat_index(std::size_t obs, int bin) const {
        return offsets[obs] + static_cast<std::size_t>(bin);
    }
};

namespace detail {

struct BasisCache {
    std::vector<std::vector<int>> exps;
    explicit BasisCache(int dim, int degree) : exps(monomial_exponents(dim, degree)) {}
};

inline double eval_model(const BinModel& m, const Eigen::VectorXd& x,
                         const std::string& where) {
    if (std::holds_alternative<PolynomialModel>(m)) {
        const auto& pm = std::get<PolynomialModel>(m);
        static thread_local std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
        auto key = std::make_pair(static_cast<int>(x.size()), pm.degree);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, monomial_exponents(key.first, key.second)).first;
        return eval_monomials(it->second, pm.coefficients, x);
    }
    const auto& rm = std::get<RationalModel>(m);
    static thread_local std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
    auto nkey = std::make_pair(static_cast<int>(x.size()), rm.num_degree);
    auto dkey = std::make_pair(static_cast<int>(x.size()), rm.den_degree);
    auto nit = cache.find(nkey);
    if (nit == cache.end()) nit = cache.emplace(nkey, monomial_exponents(nkey.first, nkey.second)).first;
    auto dit = cache.find(dkey);
    if (dit == cache.end()) dit = cache.emplace(dkey, monomial_exponents(dkey.first, dkey.second)).first;
    double den = eval_monomials(dit->second, rm.den_coefficients, x);
    if (!(den > 0.0)) throw PoleError("rational denominator <= 0 at evaluation point (" + where + ")");
    return eval_monomials(nit->second, rm.num_coefficients, x) / den;
}

inline Eigen::VectorXd eval_model_grad(const BinModel& m, const Eigen::VectorXd& x,
                                       const std::string& where) {
    static thread_local std::map<std::pair<int, int>, std::vector<std::vector<int>>> cache;
    auto basis = [&](int deg) -> const std::vector<std::vector<int>>& {
        auto key = std::make_pair(static_cast<int>(x.size()), deg);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, monomial_exponents(key.first, key.second)).first;
        return it->second;
    };
    if (std::holds_alternative<PolynomialModel>(m)) {
        const auto& pm = std::get<PolynomialModel>(m);
        return eval_monomials_grad(basis(pm.degree), pm.coefficients, x);
    }
    const auto& rm = std::get<RationalModel>(m);
    double den = eval_monomials(basis(rm.den_degree), rm.den_coefficients, x);
    if (!(den > 0.0)) throw PoleError("rational denominator <= 0 at evaluation point (" + where + ")");
    double num = eval_monomials(basis(rm.num_degree), rm.num_coefficients, x);
    Eigen::VectorXd gn = eval_monomials_grad(basis(rm.num_degree), rm.num_coefficients, x);
    Eigen::VectorXd gd = eval_monomials_grad(basis(rm.den_degree), rm.den_coefficients, x);
    return (gn * den - num * gd) / (den * den);
}

} // namespace detail

// --- evaluation ---------------------------------------------------------

struct SurrogateEvalResult {
    std::vector<BinEval> bins; // flat layout
    bool extrapolated = false; // p outside the fitted box
};

inline SurrogateEvalResult eval(const SurrogateSet& s, const Eigen::VectorXd& p) {
    SurrogateEvalResult out;
    out.bins.resize(s.total_bins());
    Eigen::VectorXd x = s.scaling.to_unit(p);
    for (int i = 0; i < x.size(); ++i)
        if (x[i] < -1.0 - 1e-12 || x[i] > 1.0 + 1e-12) out.extrapolated = true;
    for (std::size_t obs = 0; obs < s.observable_ids.size(); ++obs) {
        for (int b = 0; b < s.bins_per_observable[obs]; ++b) {
            std::size_t k = s.flat_index(obs, b);
            std::string where = s.observable_ids[obs] + " bin " + std::to_string(b + 1);
            out.bins[k].value = detail::eval_model(s.value_models[k], x, where);
            double u = detail::eval_model(s.unc_models[k], x, where);
            out.bins[k].uncertainty = std::max(0.0, u);
        }
    }
    return out;
}

inline BinEval eval_bin(const SurrogateSet& s, std::size_t flat, const Eigen::VectorXd& p) {
    Eigen::VectorXd x = s.scaling.to_unit(p);
    BinEval e;
    e.value = detail::eval_model(s.value_models[flat], x, "bin " + std::to_string(flat));
    e.uncertainty = std::max(0.0, detail::eval_model(s.unc_models[flat], x, "bin " + std::to_string(flat)));
    return e;
}

struct BinGradient {
    Eigen::VectorXd value;       // df_b/dp
    Eigen::VectorXd uncertainty; // d(df_b)/dp, zeroed where the clamp is active
};

inline std::vector<BinGradient> eval_gradient(const SurrogateSet& s, const Eigen::VectorXd& p) {
    std::vector<BinGradient> out(s.total_bins());
    Eigen::VectorXd x = s.scaling.to_unit(p);
    Eigen::VectorXd jac = s.scaling.jacobian_diag();
    for (std::size_t k = 0; k < s.total_bins(); ++k) {
        std::string where = "bin " + std::to_string(k);
        out[k].value = detail::eval_model_grad(s.value_models[k], x, where).cwiseProduct(jac);
        double u = detail::eval_model(s.unc_models[k], x, where);
        if (u > 0.0)
            out[k].uncertainty = detail::eval_model_grad(s.unc_models[k], x, where).cwiseProduct(jac);
        else
            out[k].uncertainty = Eigen::VectorXd::Zero(p.size());
    }
    return out;
}

// --- fitting ------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXd scaled_design(const MCRunGrid& grid, const BoxScaling& scaling,
                                     const std::vector<std::vector<int>>& exps) {
    Eigen::MatrixXd V(grid.runs(), static_cast<int>(exps.size()));
    for (int r = 0; r < grid.runs(); ++r) {
        Eigen::VectorXd x = scaling.to_unit(grid.points.row(r).transpose());
        V.row(r) = design_row(exps, x);
    }
    return V;
}

inline void init_surrogate_layout(SurrogateSet& s, const MCRunGrid& grid, const ReferenceSet& ref) {
    s.scaling = BoxScaling{grid.space.lower, grid.space.upper};
    s.offsets.clear();
    s.bins_per_observable.clear();
    s.observable_ids.clear();
    std::size_t off = 0;
    for (const auto& o : ref.observables) {
        s.offsets.push_back(off);
        s.bins_per_observable.push_back(o.bins());
        s.observable_ids.push_back(o.id);
        off += static_cast<std::size_t>(o.bins());
    }
    s.value_models.resize(off);
    s.unc_models.resize(off);
    s.fit_residuals.assign(off, 0.0);
}

} // namespace detail

inline SurrogateSet fit_polynomial(const MCRunGrid& grid, const ReferenceSet& ref, int degree) {
    grid.validate(ref);
    int d = grid.space.dim();
    long need = basis_size(d, degree);
    if (grid.runs() < need)
        throw TuneError("polynomial fit: " + std::to_string(grid.runs()) + " runs but degree " +
                        std::to_string(degree) + " in " + std::to_string(d) + " parameters needs >= " +
                        std::to_string(need));
    SurrogateSet s;
    detail::init_surrogate_layout(s, grid, ref);
    auto exps = monomial_exponents(d, degree);
    Eigen::MatrixXd V = detail::scaled_design(grid, s.scaling, exps);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < V.cols())
        throw TuneError("polynomial fit: rank-deficient design matrix (rank " +
                        std::to_string(qr.rank()) + " of " + std::to_string(V.cols()) +
                        "); add runs or spread the sampled points");
    parallel_for(ref.size(), [&](std::size_t i) {
        const auto& o = ref.observables[i];
        for (int b = 0; b < o.bins(); ++b) {
            std::size_t k = s.flat_index(i, b);
            Eigen::VectorXd yv = grid.values[i].col(b);
            Eigen::VectorXd yu = grid.uncertainties[i].col(b);
            Eigen::VectorXd cv = qr.solve(yv);
            Eigen::VectorXd cu = qr.solve(yu);
            s.value_models[k] = PolynomialModel{degree, cv};
            s.unc_models[k] = PolynomialModel{degree, cu};
            s.fit_residuals[k] = std::sqrt((V * cv - yv).squaredNorm() / grid.runs());
        }
    });
    return s;
}

inline SurrogateSet fit_rational(const MCRunGrid& grid, const ReferenceSet& ref, int num_degree,
                                 int den_degree, int max_sweeps = 20) {
    grid.validate(ref);
    int d = grid.space.dim();
    long n_num = basis_size(d, num_degree);
    long n_den = basis_size(d, den_degree);
    long need = n_num + n_den - 1;
    if (grid.runs() < need)
        throw TuneError("rational fit: " + std::to_string(grid.runs()) + " runs but (" +
                        std::to_string(num_degree) + "," + std::to_string(den_degree) +
                        ") needs >= " + std::to_string(need));
    SurrogateSet s;
    detail::init_surrogate_layout(s, grid, ref);
    auto num_exps = monomial_exponents(d, num_degree);
    auto den_exps = monomial_exponents(d, den_degree);
    Eigen::MatrixXd Vn = detail::scaled_design(grid, s.scaling, num_exps);
    Eigen::MatrixXd Vd = detail::scaled_design(grid, s.scaling, den_exps);

    auto fit_one = [&](const Eigen::VectorXd& y, const std::string& where) -> RationalModel {
        int n = grid.runs();
        // unknowns: [num coeffs (n_num); den coeffs excluding constant (n_den-1)]
        // rows: q(x_i) * y_i - n(x_i) = 0  with q = 1 + sum_{k>=1} c_k m_k(x)
        Eigen::VectorXd row_weight = Eigen::VectorXd::Ones(n);
        Eigen::VectorXd prev = Eigen::VectorXd::Zero(n_num + n_den - 1);
        Eigen::VectorXd sol = prev;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            Eigen::MatrixXd A(n, n_num + n_den - 1);
            Eigen::VectorXd rhs(n);
            for (int r = 0; r < n; ++r) {
                double wr = row_weight[r];
                A.block(r, 0, 1, n_num) = wr * Vn.row(r);
                for (long k = 1; k < n_den; ++k)
                    A(r, n_num + k - 1) = -wr * y[r] * Vd(r, static_cast<int>(k));
                rhs[r] = wr * y[r];
            }
            sol = A.colPivHouseholderQr().solve(rhs);
            if (sweep > 0 && (sol - prev).lpNorm<Eigen::Infinity>() < 1e-10) break;
            prev = sol;
            // reweight rows by 1/q(x_i)
            for (int r = 0; r < n; ++r) {
                double q = 1.0;
                for (long k = 1; k < n_den; ++k) q += sol[n_num + k - 1] * Vd(r, static_cast<int>(k));
                row_weight[r] = 1.0 / std::max(1e-8, std::abs(q));
            }
        }
        RationalModel m;
        m.num_degree = num_degree;
        m.den_degree = den_degree;
        m.num_coefficients = sol.head(n_num);
        m.den_coefficients = Eigen::VectorXd::Zero(n_den);
        m.den_coefficients[0] = 1.0;
        for (long k = 1; k < n_den; ++k) m.den_coefficients[static_cast<int>(k)] = sol[n_num + k - 1];
        // the denominator must keep one sign over the sampled points
        bool pos = false, nonpos = false;
        for (int r = 0; r < n; ++r) {
            double q = Vd.row(r).dot(m.den_coefficients);
            if (q > 0.0) pos = true;
            else nonpos = true;
        }
        if (pos && nonpos)
            throw PoleError("rational fit: pole inside sampled domain for " + where);
        if (!pos)
            throw PoleError("rational fit: denominator non-positive over grid for " + where);
        return m;
    };

    parallel_for(ref.size(), [&](std::size_t i) {
        const auto& o = ref.observables[i];
        for (int b = 0; b < o.bins(); ++b) {
            std::size_t k = s.flat_index(i, b);
            std::string where = o.id + " bin " + std::to_string(b + 1);
            RationalModel mv = fit_one(grid.values[i].col(b), where);
            RationalModel mu = fit_one(grid.uncertainties[i].col(b), where);
            double rss = 0.0;
            for (int r = 0; r < grid.runs(); ++r) {
                double num = Vn.row(r).dot(mv.num_coefficients);
                double den = Vd.row(r).dot(mv.den_coefficients);
                double res = num / den - grid.values[i](r, b);
                rss += res * res;
            }
            s.fit_residuals[k] = std::sqrt(rss / grid.runs());
            s.value_models[k] = std::move(mv);
            s.unc_models[k] = std::move(mu);
        }
    });
    return s;
}

// Per-bin min/max of MC values over runs, flat layout.
inline std::vector<std::pair<double, double>> envelope(const MCRunGrid& grid) {
    std::vector<std::pair<double, double>> out;
    for (const auto& m : grid.values)
        for (int b = 0; b < m.cols(); ++b)
            out.emplace_back(m.col(b).minCoeff(), m.col(b).maxCoeff());
    return out;
}

// --- serialization ------------------------------------------------------

inline nlohmann::json surrogate_to_json(const SurrogateSet& s) {
    using nlohmann::json;
    json j;
    j["scaling"] = {{"lower", json::array()}, {"upper", json::array()}};
    for (int i = 0; i < s.scaling.lower.size(); ++i) {
        j["scaling"]["lower"].push_back(s.scaling.lower[i]);
        j["scaling"]["upper"].push_back(s.scaling.upper[i]);
    }
    auto model_to_json = [](const BinModel& m) -> json {
        if (std::holds_alternative<PolynomialModel>(m)) {
            const auto& pm = std::get<PolynomialModel>(m);
            json c = json::array();
            for (int i = 0; i < pm.coefficients.size(); ++i) c.push_back(pm.coefficients[i]);
            return json{{"kind", "polynomial"}, {"degree", pm.degree}, {"coefficients", c}};
        }
        const auto& rm = std::get<RationalModel>(m);
        json cn = json::array(), cd = json::array();
        for (int i = 0; i < rm.num_coefficients.size(); ++i) cn.push_back(rm.num_coefficients[i]);
        for (int i = 0; i < rm.den_coefficients.size(); ++i) cd.push_back(rm.den_coefficients[i]);
        return json{{"kind", "rational"},
                    {"num_degree", rm.num_degree},
                    {"den_degree", rm.den_degree},
                    {"num_coefficients", cn},
                    {"den_coefficients", cd}};
    };
    json obs = json::array();
    for (std::size_t i = 0; i < s.observable_ids.size(); ++i) {
        json jo;
        jo["id"] = s.observable_ids[i];
        json bins = json::array();
        for (int b = 0; b < s.bins_per_observable[i]; ++b) {
            std::size_t k = s.flat_index(i, b);
            bins.push_back({{"value_model", model_to_json(s.value_models[k])},
                            {"unc_model", model_to_json(s.unc_models[k])},
                            {"fit_residual", s.fit_residuals[k]}});
        }
        jo["bins"] = std::move(bins);
        obs.push_back(std::move(jo));
    }
    j["observables"] = std::move(obs);
    return j;
}

inline SurrogateSet surrogate_from_json(const nlohmann::json& j) {
    SurrogateSet s;
    const auto& lo = j.at("scaling").at("lower");
    const auto& hi = j.at("scaling").at("upper");
    s.scaling.lower.resize(lo.size());
    s.scaling.upper.resize(hi.size());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        s.scaling.lower[static_cast<int>(i)] = lo.at(i).get<double>();
        s.scaling.upper[static_cast<int>(i)] = hi.at(i).get<double>();
    }
    auto model_from_json = [](const nlohmann::json& jm) -> BinModel {
        auto read_vec = [](const nlohmann::json& a) {
            Eigen::VectorXd v(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a.at(i).get<double>();
            return v;
        };
        if (jm.at("kind") == "polynomial")
            return PolynomialModel{jm.at("degree").get<int>(), read_vec(jm.at("coefficients"))};
        return RationalModel{jm.at("num_degree").get<int>(), jm.at("den_degree").get<int>(),
                             read_vec(jm.at("num_coefficients")), read_vec(jm.at("den_coefficients"))};
    };
    std::size_t off = 0;
    for (const auto& jo : j.at("observables")) {
        s.observable_ids.push_back(jo.at("id").get<std::string>());
        s.offsets.push_back(off);
        const auto& bins = jo.at("bins");
        s.bins_per_observable.push_back(static_cast<int>(bins.size()));
        for (const auto& jb : bins) {
            s.value_models.push_back(model_from_json(jb.at("value_model")));
            s.unc_models.push_back(model_from_json(jb.at("unc_model")));
            s.fit_residuals.push_back(jb.at("fit_residual").get<double>());
        }
        off += bins.size();
    }
    return s;
}

} // namespace tunekit
