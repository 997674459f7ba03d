// Command-line front end: ingest -> surrogate fit -> filter -> tune ->
// evaluate, with JSON documents throughout. Every option can come from a
// declarative --config file; explicit flags win, and the merged effective
// config is echoed into each output document.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tunekit/bilevel.hpp"
#include "tunekit/chi2.hpp"
#include "tunekit/common.hpp"
#include "tunekit/data_model.hpp"
#include "tunekit/evaluation.hpp"
#include "tunekit/filtering.hpp"
#include "tunekit/io.hpp"
#include "tunekit/robust.hpp"
#include "tunekit/surrogate.hpp"

namespace {

using nlohmann::json;
using namespace tunekit;

// Fills option values from the config document unless the flag was given
// on the command line, and records the merged result for provenance.
struct ConfigMerge {
    CLI::App* cmd;
    json cfg = json::object();
    json effective = json::object();

    void load(const std::string& path) {
        if (!path.empty()) cfg = load_json_file(path);
    }

    template <typename T>
    void apply(const std::string& name, T& value) {
        if (cmd->count("--" + name) == 0 && cfg.contains(name)) value = cfg.at(name).get<T>();
        effective[name] = value;
    }
};

struct IoOptions {
    std::string config_path;
    std::string reference;
    std::string mc_runs;
    std::string surrogate;
    std::string output;
    unsigned threads = 1;
};

void add_io_options(CLI::App* cmd, IoOptions& io, bool needs_surrogate) {
    cmd->add_option("--config", io.config_path, "JSON config file; flags override its fields");
    cmd->add_option("--reference", io.reference, "reference data document");
    cmd->add_option("--mc-runs", io.mc_runs, "simulator run grid document");
    if (needs_surrogate) cmd->add_option("--surrogate", io.surrogate, "fitted surrogate document");
    cmd->add_option("--output", io.output, "output document path");
    cmd->add_option("--threads", io.threads, "worker pool size (0 = hardware)");
}

void merge_io(ConfigMerge& m, IoOptions& io, bool needs_surrogate) {
    m.load(io.config_path);
    m.apply("reference", io.reference);
    m.apply("mc-runs", io.mc_runs);
    if (needs_surrogate) m.apply("surrogate", io.surrogate);
    m.apply("output", io.output);
    m.apply("threads", io.threads);
    worker_count() = io.threads;
    if (io.reference.empty()) throw TuneError("missing --reference (or config field)");
    if (io.mc_runs.empty()) throw TuneError("missing --mc-runs (or config field)");
    if (needs_surrogate && io.surrogate.empty())
        throw TuneError("missing --surrogate (or config field)");
    if (io.output.empty()) throw TuneError("missing --output (or config field)");
}

// Accepts either a bare mask document or a filter output wrapping one.
FilterMask load_mask(const std::string& path) {
    if (path.empty()) return {};
    json j = load_json_file(path);
    return mask_from_json(j.contains("mask") ? j.at("mask") : j);
}

// Accepts either a bare tune-result document or a tune output wrapping one.
json load_result_doc(const std::string& path) {
    json j = load_json_file(path);
    return j.contains("result") ? j.at("result") : j;
}

TuneResult result_from_json(const json& j, const ParameterSpace& space) {
    TuneResult res;
    res.method = method_from_string(j.at("method").get<std::string>());
    res.weights = weights_from_json(j.at("weights"));
    res.p_star.resize(space.dim());
    const auto& ps = j.at("p_star");
    for (int i = 0; i < space.dim(); ++i) res.p_star[i] = ps.at(space.names[i]).get<double>();
    res.objective_value = j.value("objective_value", 0.0);
    res.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("mask")) res.mask = mask_from_json(j.at("mask"));
    return res;
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::pair<double, double>>& rows) {
    std::ofstream out(path);
    if (!out) throw TuneError("cannot open '" + path + "' for writing");
    out << header << "\n";
    out.precision(17);
    for (const auto& [a, b] : rows) out << a << "," << b << "\n";
    if (!out) throw TuneError("failed writing '" + path + "'");
}

double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return 0.0;
    double pos = q * (static_cast<double>(v.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// --- surrogate ----------------------------------------------------------

struct SurrogateArgs {
    IoOptions io;
    std::string kind = "polynomial";
    int degree = 3;
    int num_degree = 3;
    int den_degree = 1;
};

void run_surrogate(CLI::App* cmd, SurrogateArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, false);
    m.apply("kind", a.kind);
    m.apply("degree", a.degree);
    m.apply("num-degree", a.num_degree);
    m.apply("den-degree", a.den_degree);

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);

    SurrogateSet s;
    if (a.kind == "polynomial")
        s = fit_polynomial(grid, ref, a.degree);
    else if (a.kind == "rational")
        s = fit_rational(grid, ref, a.num_degree, a.den_degree);
    else
        throw TuneError("unknown surrogate kind '" + a.kind + "'");

    json report;
    report["bins"] = s.fit_residuals.size();
    std::vector<double> resid = s.fit_residuals;
    std::sort(resid.begin(), resid.end());
    json q = json::object();
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0})
        q[std::to_string(static_cast<int>(100 * p)) + "%"] = quantile_sorted(resid, p);
    report["residual_quantiles"] = std::move(q);
    json per_obs = json::object();
    for (std::size_t i = 0; i < s.observable_ids.size(); ++i) {
        double worst = 0.0;
        for (int b = 0; b < s.bins_per_observable[i]; ++b)
            worst = std::max(worst, s.fit_residuals[s.flat_index(i, b)]);
        per_obs[s.observable_ids[i]] = worst;
    }
    report["worst_residual_per_observable"] = std::move(per_obs);

    json out;
    out["config"] = m.effective;
    out["fit_report"] = std::move(report);
    out["surrogate"] = surrogate_to_json(s);
    write_json_file(a.io.output, out);
    std::cout << "surrogate: " << s.fit_residuals.size() << " bin models -> " << a.io.output
              << "\n";
}

// --- filter -------------------------------------------------------------

struct FilterArgs {
    IoOptions io;
    std::string mode = "bin";
    bool envelope = false;
    double alpha = 0.05;
    double zscore_threshold = 3.0;
    int multistarts = 100;
    std::uint64_t seed = 0;
};

void run_filter(CLI::App* cmd, FilterArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, true);
    m.apply("mode", a.mode);
    m.apply("envelope", a.envelope);
    m.apply("alpha", a.alpha);
    m.apply("zscore-threshold", a.zscore_threshold);
    m.apply("multistarts", a.multistarts);
    m.apply("seed", a.seed);

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);
    SurrogateSet s = surrogate_from_json(load_json_file(a.io.surrogate).at("surrogate"));

    HypothesisConfig hyp;
    hyp.alpha = a.alpha;
    hyp.d = grid.space.dim();
    Chi2Config inner;
    inner.multistarts = a.multistarts;
    inner.seed = a.seed;

    FilterMask mask = apply_filters(ref, s, grid.space, filter_mode_from_string(a.mode), hyp,
                                    inner, a.zscore_threshold);
    if (a.envelope) {
        FilterMask env = envelope_prefilter(ref, grid);
        for (const auto& id : env.excluded_observables) mask.excluded_observables.insert(id);
    }
    mask.validate(ref);

    json table = json::array();
    for (const auto& o : ref.observables) {
        json row;
        row["observable"] = o.id;
        if (mask.observable_excluded(o.id)) {
            row["status"] = "excluded";
            row["bins_removed"] = o.bins();
        } else if (auto it = mask.kept_bin_range.find(o.id); it != mask.kept_bin_range.end()) {
            row["status"] = "trimmed";
            row["kept"] = {{"start", it->second.start}, {"end", it->second.end}};
            row["bins_removed"] = o.bins() - (it->second.end - it->second.start + 1);
        } else {
            row["status"] = "kept";
            row["bins_removed"] = 0;
        }
        table.push_back(std::move(row));
        std::cout << o.id << ": " << table.back()["status"].get<std::string>() << " ("
                  << table.back()["bins_removed"].get<int>() << " bins removed)\n";
    }

    json out;
    out["config"] = m.effective;
    out["mask"] = mask_to_json(mask);
    out["table"] = std::move(table);
    write_json_file(a.io.output, out);
}

// --- tune ---------------------------------------------------------------

struct TuneArgs {
    IoOptions io;
    std::string method = "bilevel-portfolio";
    std::string mask_path;
    std::uint64_t seed = 0;
    int multistarts = 100;
    int max_iterations = 500;
    int n_max = 1000;
    int n0 = 0;
    int n_cand = 0;
    double lambda = 1.0;
    std::vector<double> nu_cycle = {0.3, 0.5, 0.8, 0.95};
    std::vector<double> mu = {100.0};
    int robust_multistarts = 10;
};

void run_tune(CLI::App* cmd, TuneArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, true);
    m.apply("method", a.method);
    m.apply("mask", a.mask_path);
    m.apply("seed", a.seed);
    m.apply("multistarts", a.multistarts);
    m.apply("max-iterations", a.max_iterations);
    m.apply("n-max", a.n_max);
    m.apply("n0", a.n0);
    m.apply("n-cand", a.n_cand);
    m.apply("lambda", a.lambda);
    m.apply("nu-cycle", a.nu_cycle);
    m.apply("mu", a.mu);
    m.apply("robust-multistarts", a.robust_multistarts);

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);
    SurrogateSet s = surrogate_from_json(load_json_file(a.io.surrogate).at("surrogate"));
    FilterMask mask = load_mask(a.mask_path);
    mask.validate(ref);

    Chi2Config inner;
    inner.multistarts = a.multistarts;
    inner.max_iterations = a.max_iterations;
    inner.seed = a.seed;

    TuneMethod method = method_from_string(a.method);
    json out;
    out["config"] = m.effective;
    TuneResult res;

    switch (method) {
    case TuneMethod::AllWeightsEqual: {
        WeightVector w;
        for (const auto& o : ref.observables)
            if (!mask.observable_excluded(o.id)) w.weights[o.id] = 1.0;
        auto [p, v] = minimize_chi2(normalize_weights(w), s, ref, mask, grid.space, inner);
        res.method = method;
        res.weights = normalize_weights(w);
        res.p_star = p;
        res.objective_value = v;
        res.mask = mask;
        res.seed = a.seed;
        break;
    }
    case TuneMethod::BilevelPortfolio:
    case TuneMethod::BilevelMeanscore:
    case TuneMethod::BilevelMedianscore: {
        OuterConfig outer;
        outer.n0 = a.n0;
        outer.n_max = a.n_max;
        outer.n_cand = a.n_cand;
        outer.nu_cycle = a.nu_cycle;
        outer.lambda = a.lambda;
        outer.seed = a.seed;
        OuterObjective obj = method == TuneMethod::BilevelPortfolio ? OuterObjective::Portfolio
                             : method == TuneMethod::BilevelMeanscore
                                 ? OuterObjective::Meanscore
                                 : OuterObjective::Medianscore;
        res = run_bilevel(obj, s, ref, mask, grid.space, outer, inner);
        break;
    }
    case TuneMethod::Robust: {
        RobustConfig cfg;
        cfg.multistarts = a.robust_multistarts;
        cfg.seed = a.seed;
        if (a.mu.size() <= 1) {
            cfg.mu = a.mu.empty() ? 100.0 : a.mu.front();
            res = solve_robust(s, ref, mask, grid.space, cfg);
        } else {
            IdealTuneTable ideal = ideal_tunes(s, ref, grid.space, inner, mask);
            MuSweepResult sweep = sweep_mu(s, ref, mask, grid.space, a.mu, cfg, ideal);
            res = sweep.results[sweep.best_index];
            json per_mu = json::array();
            for (std::size_t i = 0; i < a.mu.size(); ++i)
                per_mu.push_back({{"mu", a.mu[i]},
                                  {"area", sweep.areas[i]},
                                  {"result", tune_result_to_json(sweep.results[i],
                                                                 grid.space.names)}});
            out["sweep"] = {{"best_mu", sweep.best_mu}, {"per_mu", std::move(per_mu)}};
        }
        break;
    }
    }

    out["result"] = tune_result_to_json(res, grid.space.names);
    write_json_file(a.io.output, out);
    std::cout << a.method << ": objective " << res.objective_value << " -> " << a.io.output
              << "\n";
}

// --- evaluate -----------------------------------------------------------

struct EvaluateArgs {
    IoOptions io;
    std::string result_path;
    std::string cdf_csv;
    double gamma = 0.01;
    int tau_count = 200;
    int multistarts = 100;
};

void run_evaluate(CLI::App* cmd, EvaluateArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, true);
    m.apply("result", a.result_path);
    m.apply("cdf-csv", a.cdf_csv);
    m.apply("gamma", a.gamma);
    m.apply("tau-count", a.tau_count);
    m.apply("multistarts", a.multistarts);
    if (a.result_path.empty()) throw TuneError("missing --result (or config field)");

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);
    SurrogateSet s = surrogate_from_json(load_json_file(a.io.surrogate).at("surrogate"));
    TuneResult res = result_from_json(load_result_doc(a.result_path), grid.space);
    res.mask.validate(ref);

    WeightVector w = normalize_weights(res.weights);
    PosteriorCovariance g = gamma_post(res.p_star, w, s, ref, res.mask);

    json report;
    report["method"] = to_string(res.method);
    report["weighted_chi2"] = weighted_chi2_metric(res, s, ref);
    report["a_optimality"] = a_optimality(g);
    report["d_optimality_log"] = d_optimality_log(g);
    json r_param = json::object();
    for (int i = 0; i < grid.space.dim(); ++i)
        r_param[grid.space.names[i]] = (res.p_star[i] - grid.space.lower[i]) /
                                       (grid.space.upper[i] - grid.space.lower[i]);
    report["r_param"] = std::move(r_param);
    try {
        double n = effective_n(w, grid.space.dim(), a.gamma);
        Eigentune et = eigentune(res.p_star, w, s, ref, grid.space, n, a.gamma, res.mask);
        json intervals = json::object();
        for (int i = 0; i < grid.space.dim(); ++i)
            intervals[grid.space.names[i]] = {{"min", et.intervals[static_cast<std::size_t>(i)].first},
                                              {"max", et.intervals[static_cast<std::size_t>(i)].second}};
        report["eigentune"] = {{"intervals", std::move(intervals)},
                               {"n_effective", et.n_effective},
                               {"gamma", et.gamma}};
    } catch (const TuneError& e) {
        report["eigentune"] = {{"error", e.what()}};
    }

    if (!a.cdf_csv.empty()) {
        std::vector<double> taus = default_tau_grid(a.tau_count);
        CdfCurve curve = cdf_curve(res.p_star, s, ref, taus, res.mask);
        std::vector<std::pair<double, double>> rows;
        for (std::size_t i = 0; i < curve.taus.size(); ++i)
            rows.emplace_back(curve.taus[i], curve.counts[i]);
        write_csv(a.cdf_csv, "tau,count", rows);
    }

    json out;
    out["config"] = m.effective;
    out["report"] = std::move(report);
    write_json_file(a.io.output, out);
    std::cout << "evaluate: weighted chi2 " << out["report"]["weighted_chi2"].get<double>()
              << " -> " << a.io.output << "\n";
}

// --- eigentune ----------------------------------------------------------

struct EigentuneArgs {
    IoOptions io;
    std::string result_path;
    double gamma = 0.01;
    double n_override = 0.0; // 0 = derive from the weights
};

void run_eigentune(CLI::App* cmd, EigentuneArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, true);
    m.apply("result", a.result_path);
    m.apply("gamma", a.gamma);
    m.apply("n", a.n_override);
    if (a.result_path.empty()) throw TuneError("missing --result (or config field)");

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);
    SurrogateSet s = surrogate_from_json(load_json_file(a.io.surrogate).at("surrogate"));
    TuneResult res = result_from_json(load_result_doc(a.result_path), grid.space);

    WeightVector w = normalize_weights(res.weights);
    double n = a.n_override > 0.0 ? a.n_override : effective_n(w, grid.space.dim(), a.gamma);
    Eigentune et = eigentune(res.p_star, w, s, ref, grid.space, n, a.gamma, res.mask);

    json intervals = json::object();
    for (int i = 0; i < grid.space.dim(); ++i)
        intervals[grid.space.names[i]] = {{"min", et.intervals[static_cast<std::size_t>(i)].first},
                                          {"max", et.intervals[static_cast<std::size_t>(i)].second}};
    json out;
    out["config"] = m.effective;
    out["eigentune"] = {{"intervals", std::move(intervals)},
                        {"n_effective", et.n_effective},
                        {"gamma", et.gamma}};
    write_json_file(a.io.output, out);
    std::cout << "eigentune: n_effective " << et.n_effective << " -> " << a.io.output << "\n";
}

// --- cdf ----------------------------------------------------------------

struct CdfArgs {
    IoOptions io;
    std::string result_path;
    std::string csv;
    std::string ideal_csv;
    int tau_count = 200;
    double tau_min = 1e-3;
    double tau_max = 1e3;
    int multistarts = 100;
    std::uint64_t seed = 0;
};

void run_cdf(CLI::App* cmd, CdfArgs& a) {
    ConfigMerge m{cmd};
    merge_io(m, a.io, true);
    m.apply("result", a.result_path);
    m.apply("csv", a.csv);
    m.apply("ideal-csv", a.ideal_csv);
    m.apply("tau-count", a.tau_count);
    m.apply("tau-min", a.tau_min);
    m.apply("tau-max", a.tau_max);
    m.apply("multistarts", a.multistarts);
    m.apply("seed", a.seed);
    if (a.result_path.empty()) throw TuneError("missing --result (or config field)");

    ReferenceSet ref = load_reference(a.io.reference);
    MCRunGrid grid = load_mc_runs(a.io.mc_runs, ref);
    SurrogateSet s = surrogate_from_json(load_json_file(a.io.surrogate).at("surrogate"));
    TuneResult res = result_from_json(load_result_doc(a.result_path), grid.space);
    res.mask.validate(ref);

    Chi2Config inner;
    inner.multistarts = a.multistarts;
    inner.seed = a.seed;
    std::vector<double> taus = default_tau_grid(a.tau_count, a.tau_min, a.tau_max);
    CdfCurve run = cdf_curve(res.p_star, s, ref, taus, res.mask);
    IdealTuneTable ideal = ideal_tunes(s, ref, grid.space, inner, res.mask);
    CdfCurve ideal_curve = ideal_cdf_curve(ideal, taus);
    double area = area_between(run, ideal_curve);

    auto to_rows = [](const CdfCurve& c) {
        std::vector<std::pair<double, double>> rows;
        for (std::size_t i = 0; i < c.taus.size(); ++i) rows.emplace_back(c.taus[i], c.counts[i]);
        return rows;
    };
    if (!a.csv.empty()) write_csv(a.csv, "tau,count", to_rows(run));
    if (!a.ideal_csv.empty()) write_csv(a.ideal_csv, "tau,count", to_rows(ideal_curve));

    json out;
    out["config"] = m.effective;
    out["area_to_ideal"] = area;
    json ideal_json = json::array();
    for (const auto& e : ideal) ideal_json.push_back({{"observable", e.id}, {"chi_ideal", e.chi_ideal}});
    out["ideal_tunes"] = std::move(ideal_json);
    write_json_file(a.io.output, out);
    std::cout << "cdf: area to ideal " << area << " -> " << a.io.output << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tunekit: surrogate-based simulator tuning"};
    app.require_subcommand(1);

    SurrogateArgs sa;
    auto* c_sur = app.add_subcommand("surrogate", "fit per-bin surrogate models");
    add_io_options(c_sur, sa.io, false);
    c_sur->add_option("--kind", sa.kind, "polynomial | rational");
    c_sur->add_option("--degree", sa.degree, "polynomial total degree");
    c_sur->add_option("--num-degree", sa.num_degree, "rational numerator degree");
    c_sur->add_option("--den-degree", sa.den_degree, "rational denominator degree");

    FilterArgs fa;
    auto* c_fil = app.add_subcommand("filter", "build a data filter mask");
    add_io_options(c_fil, fa.io, true);
    c_fil->add_option("--mode", fa.mode, "none | observable | bin");
    c_fil->add_flag("--envelope", fa.envelope, "also apply the MC envelope pre-filter");
    c_fil->add_option("--alpha", fa.alpha, "hypothesis test significance level");
    c_fil->add_option("--zscore-threshold", fa.zscore_threshold, "observable outlier threshold");
    c_fil->add_option("--multistarts", fa.multistarts, "inner optimizer starts");
    c_fil->add_option("--seed", fa.seed, "random seed");

    TuneArgs ta;
    auto* c_tun = app.add_subcommand("tune", "run a tuning method");
    add_io_options(c_tun, ta.io, true);
    c_tun->add_option("--method", ta.method,
                      "all-weights-equal | bilevel-{portfolio,meanscore,medianscore} | robust");
    c_tun->add_option("--mask", ta.mask_path, "filter mask document");
    c_tun->add_option("--seed", ta.seed, "random seed");
    c_tun->add_option("--multistarts", ta.multistarts, "inner optimizer starts");
    c_tun->add_option("--max-iterations", ta.max_iterations, "inner iteration cap");
    c_tun->add_option("--n-max", ta.n_max, "outer evaluation budget");
    c_tun->add_option("--n0", ta.n0, "outer initial design size (0 = auto)");
    c_tun->add_option("--n-cand", ta.n_cand, "candidate pool size (0 = auto)");
    c_tun->add_option("--lambda", ta.lambda, "portfolio risk aversion");
    c_tun->add_option("--nu-cycle", ta.nu_cycle, "candidate scoring cycle");
    c_tun->add_option("--mu", ta.mu, "robust budget percentage(s); several trigger a sweep");
    c_tun->add_option("--robust-multistarts", ta.robust_multistarts, "robust search starts");

    EvaluateArgs ea;
    auto* c_eva = app.add_subcommand("evaluate", "tune-quality metrics report");
    add_io_options(c_eva, ea.io, true);
    c_eva->add_option("--result", ea.result_path, "tune result document");
    c_eva->add_option("--cdf-csv", ea.cdf_csv, "optional CDF curve CSV export");
    c_eva->add_option("--gamma", ea.gamma, "effective-n scale");
    c_eva->add_option("--tau-count", ea.tau_count, "CDF grid size");
    c_eva->add_option("--multistarts", ea.multistarts, "inner optimizer starts");

    EigentuneArgs ga;
    auto* c_eig = app.add_subcommand("eigentune", "eigentune intervals");
    add_io_options(c_eig, ga.io, true);
    c_eig->add_option("--result", ga.result_path, "tune result document");
    c_eig->add_option("--gamma", ga.gamma, "effective-n scale");
    c_eig->add_option("--n", ga.n_override, "explicit chi2 offset (0 = derive from weights)");

    CdfArgs ca;
    auto* c_cdf = app.add_subcommand("cdf", "cumulative observable-quality curves");
    add_io_options(c_cdf, ca.io, true);
    c_cdf->add_option("--result", ca.result_path, "tune result document");
    c_cdf->add_option("--csv", ca.csv, "run curve CSV export");
    c_cdf->add_option("--ideal-csv", ca.ideal_csv, "ideal curve CSV export");
    c_cdf->add_option("--tau-count", ca.tau_count, "grid size");
    c_cdf->add_option("--tau-min", ca.tau_min, "grid lower bound");
    c_cdf->add_option("--tau-max", ca.tau_max, "grid upper bound");
    c_cdf->add_option("--multistarts", ca.multistarts, "inner optimizer starts");
    c_cdf->add_option("--seed", ca.seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_sur->parsed()) run_surrogate(c_sur, sa);
        if (c_fil->parsed()) run_filter(c_fil, fa);
        if (c_tun->parsed()) run_tune(c_tun, ta);
        if (c_eva->parsed()) run_evaluate(c_eva, ea);
        if (c_eig->parsed()) run_eigentune(c_eig, ga);
        if (c_cdf->parsed()) run_cdf(c_cdf, ca);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
