#pragma once

// JSON ingestion and serialization for the reference, MC-run, and weight
// file formats. Reals round-trip exactly (nlohmann emits shortest
// representations that parse back to the same double).

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tunekit/data_model.hpp"

namespace tunekit {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("parse error in '" + path + "': " + e.what());
    }
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw TuneError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j.at(i).get<double>();
    return v;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
    json j = json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

inline ReferenceSet reference_from_json(const json& j) {
    ReferenceSet ref;
    if (!j.contains("observables") || !j.at("observables").is_array())
        throw ParseError("reference: missing 'observables' array");
    for (const auto& jo : j.at("observables")) {
        Observable o;
        o.id = jo.at("id").get<std::string>();
        if (jo.contains("group") && !jo.at("group").is_null())
            o.group = jo.at("group").get<std::string>();
        const auto& bins = jo.at("bins");
        o.values.resize(bins.size());
        o.uncertainties.resize(bins.size());
        int b = 0;
        for (const auto& jb : bins) {
            o.values[b] = jb.at("value").get<double>();
            o.uncertainties[b] = jb.at("uncertainty").get<double>();
            ++b;
        }
        ref.observables.push_back(std::move(o));
    }
    if (ref.observables.empty()) throw ParseError("reference: no observables");
    ref.rebuild_index();
    ref.validate();
    return ref;
}

inline json reference_to_json(const ReferenceSet& ref) {
    json obs = json::array();
    for (const auto& o : ref.observables) {
        json jo;
        jo["id"] = o.id;
        if (o.group) jo["group"] = *o.group;
        json bins = json::array();
        for (int b = 0; b < o.bins(); ++b)
            bins.push_back({{"value", o.values[b]}, {"uncertainty", o.uncertainties[b]}});
        jo["bins"] = std::move(bins);
        obs.push_back(std::move(jo));
    }
    return json{{"observables", std::move(obs)}};
}

inline ReferenceSet load_reference(const std::string& path) {
    return reference_from_json(load_json_file(path));
}

inline MCRunGrid mc_runs_from_json(const json& j, const ReferenceSet& ref) {
    MCRunGrid grid;
    const auto& jp = j.at("params");
    grid.space.names = jp.at("names").get<std::vector<std::string>>();
    grid.space.lower = vector_from_json(jp.at("lower"));
    grid.space.upper = vector_from_json(jp.at("upper"));
    grid.space.validate();

    const auto& runs = j.at("runs");
    int n = static_cast<int>(runs.size());
    if (n < 1) throw ParseError("mc runs: fewer runs than 1");
    int d = grid.space.dim();
    grid.points.resize(n, d);
    grid.values.resize(ref.size());
    grid.uncertainties.resize(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        grid.values[i].resize(n, ref.observables[i].bins());
        grid.uncertainties[i].resize(n, ref.observables[i].bins());
    }
    int r = 0;
    for (const auto& jr : runs) {
        Eigen::VectorXd p = vector_from_json(jr.at("point"));
        if (p.size() != d) throw ParseError("mc runs: run " + std::to_string(r + 1) + " point dimension mismatch");
        grid.points.row(r) = p.transpose();
        const auto& jobs = jr.at("observables");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto& o = ref.observables[i];
            if (!jobs.contains(o.id))
                throw ParseError("mc runs: run " + std::to_string(r + 1) + " missing observable '" + o.id + "'");
            Eigen::VectorXd v = vector_from_json(jobs.at(o.id).at("values"));
            Eigen::VectorXd u = vector_from_json(jobs.at(o.id).at("uncertainties"));
            if (v.size() != o.bins() || u.size() != o.bins())
                throw ParseError("mc runs: shape mismatch for observable '" + o.id + "' in run " +
                                 std::to_string(r + 1));
            grid.values[i].row(r) = v.transpose();
            grid.uncertainties[i].row(r) = u.transpose();
        }
        ++r;
    }
    grid.validate(ref);
    return grid;
}

inline json mc_runs_to_json(const MCRunGrid& grid, const ReferenceSet& ref) {
    json j;
    j["params"] = {{"names", grid.space.names},
                   {"lower", vector_to_json(grid.space.lower)},
                   {"upper", vector_to_json(grid.space.upper)}};
    json runs = json::array();
    for (int r = 0; r < grid.runs(); ++r) {
        json jr;
        jr["point"] = vector_to_json(grid.points.row(r).transpose());
        json jobs;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            jobs[ref.observables[i].id] = {
                {"values", vector_to_json(grid.values[i].row(r).transpose())},
                {"uncertainties", vector_to_json(grid.uncertainties[i].row(r).transpose())}};
        }
        jr["observables"] = std::move(jobs);
        runs.push_back(std::move(jr));
    }
    j["runs"] = std::move(runs);
    return j;
}

inline MCRunGrid load_mc_runs(const std::string& path, const ReferenceSet& ref) {
    return mc_runs_from_json(load_json_file(path), ref);
}

inline WeightVector weights_from_json(const json& j) {
    WeightVector w;
    for (auto it = j.begin(); it != j.end(); ++it) w.weights[it.key()] = it.value().get<double>();
    w.validate();
    return w;
}

inline json weights_to_json(const WeightVector& w) {
    json j = json::object();
    for (const auto& [id, v] : w.weights) j[id] = v;
    return j;
}

inline json mask_to_json(const FilterMask& mask) {
    json j;
    j["excluded_observables"] = json::array();
    for (const auto& id : mask.excluded_observables) j["excluded_observables"].push_back(id);
    json ranges = json::object();
    for (const auto& [id, r] : mask.kept_bin_range)
        ranges[id] = {{"start", r.start}, {"end", r.end}};
    j["kept_bin_range"] = std::move(ranges);
    return j;
}

inline FilterMask mask_from_json(const json& j) {
    FilterMask mask;
    for (const auto& id : j.at("excluded_observables"))
        mask.excluded_observables.insert(id.get<std::string>());
    const auto& ranges = j.at("kept_bin_range");
    for (auto it = ranges.begin(); it != ranges.end(); ++it)
        mask.kept_bin_range[it.key()] = BinRange{it.value().at("start").get<int>(),
                                                 it.value().at("end").get<int>()};
    return mask;
}

inline json tune_result_to_json(const TuneResult& res,
                                const std::vector<std::string>& param_names) {
    json j;
    j["method"] = to_string(res.method);
    j["weights"] = weights_to_json(res.weights);
    json ps = json::object();
    for (std::size_t i = 0; i < param_names.size(); ++i)
        ps[param_names[i]] = res.p_star[static_cast<int>(i)];
    j["p_star"] = std::move(ps);
    j["objective_value"] = res.objective_value;
    j["mask"] = mask_to_json(res.mask);
    j["seed"] = res.seed;
    json hist = json::array();
    for (const auto& [w, v] : res.history)
        hist.push_back({{"weights", weights_to_json(w)}, {"outer_value", v}});
    j["history"] = std::move(hist);
    if (!res.metadata.empty()) {
        json meta = json::object();
        for (const auto& [k, v] : res.metadata) meta[k] = v;
        j["metadata"] = std::move(meta);
    }
    return j;
}

} // namespace tunekit
