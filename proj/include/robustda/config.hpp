#pragma once

// Run configuration: a single JSON document. Unknown keys are rejected.
// Relative paths are resolved against the directory holding the config file.
//
// {
//   "data":      {"csv": "data.csv"}
//              | {"simulate": {"n": 50, "d": 2, "p": 2, "coefficients": [[1,1],[1,1]],
//                              "sigma": [[1,0],[0,1]], "mixing": {...}, "seed": 7}},
//   "missing":   "from_file" | {"complete_rows": 45},
//   "prior":     {"m": 2, "a": "zero" | [[...]]},
//   "mixing":    {"family": "gamma", "a": 2, "b": 2},
//   "algorithm": "da" | "dai",
//   "k_prime":   "all_ones" | [[0,1], ...],
//   "iterations": 30000, "burn_in": 0, "seed": 1, "replications": 1,
//   "posthoc_impute": false, "record_weights": false,
//   "outputs":   {"draws": "...", "imputations": "...", "report": "...", "dataset": "..."}
// }

#include "robustda/core.hpp"
#include "robustda/mixing.hpp"
#include "robustda/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace robustda {

using Json = nlohmann::json;

struct OutputPaths {
    std::optional<std::filesystem::path> draws;
    std::optional<std::filesystem::path> imputations;
    std::optional<std::filesystem::path> report;
    std::optional<std::filesystem::path> dataset;
};

struct RunConfig {
    std::optional<std::filesystem::path> csv;
    std::optional<SimulationBlock> simulate;
    /// Synthetic monotone structure; nullopt keeps the pattern of the source.
    std::optional<Index> complete_rows;
    /// Prior; m = d and a = 0 when absent.
    std::optional<double> prior_m;
    std::optional<Matrix> prior_a;
    MixingSpec mixing = family::PointMass{1.0};
    std::string algorithm = "da";
    /// nullopt means the all-observed structure.
    std::optional<Mask> k_prime;
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    std::uint64_t seed = 1;
    std::size_t replications = 1;
    bool posthoc_impute = false;
    bool record_weights = false;
    OutputPaths outputs;

    Prior prior(Index d) const {
        const double m = prior_m.value_or(static_cast<double>(d));
        const Matrix a = prior_a.value_or(Matrix::Zero(d, d));
        if (a.rows() != d) throw ConfigError("prior.a must be " + std::to_string(d) + " x " + std::to_string(d));
        return Prior(m, a);
    }
};

namespace config_detail {

inline void allow_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

inline double number(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
    return j.at(key).get<double>();
}

inline std::size_t count(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

inline Matrix matrix(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw ConfigError(where + " must be a non-empty array of rows");
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j.front().is_array() ? j.front().size() : 0);
    if (cols == 0) throw ConfigError(where + " must be a non-empty array of rows");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Index>(r.size()) != cols) throw ConfigError(where + ": ragged matrix rows");
        for (Index k = 0; k < cols; ++k) {
            if (!r[static_cast<std::size_t>(k)].is_number()) throw ConfigError(where + ": entries must be numbers");
            m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

inline std::vector<double> numbers(const Json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(where + "." + key + " must be an array");
    std::vector<double> v;
    for (const auto& e : j.at(key)) {
        if (!e.is_number()) throw ConfigError(where + "." + key + ": entries must be numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

}  // namespace config_detail

/// Mixing family from {"family": name, <named parameters>}.
inline MixingSpec mixing_from_json(const Json& j, const std::string& where = "mixing") {
    using namespace config_detail;
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string())
        throw ConfigError(where + " must be an object with a string 'family'");
    const std::string f = j.at("family").get<std::string>();
    auto two = [&](const char* a, const char* b) {
        allow_keys(j, where, {"family", a, b});
        return std::pair{number(j, a, where), number(j, b, where)};
    };
    try {
        if (f == "pointmass") {
            allow_keys(j, where, {"family", "w0"});
            return family::PointMass{number(j, "w0", where)};
        }
        if (f == "discrete") {
            allow_keys(j, where, {"family", "atoms", "probs"});
            return family::FiniteDiscrete{numbers(j, "atoms", where), numbers(j, "probs", where)};
        }
        if (f == "gig") {
            allow_keys(j, where, {"family", "a", "b", "q"});
            return family::Gig{number(j, "a", where), number(j, "b", where), number(j, "q", where)};
        }
        if (f == "pareto") { auto [a, b] = two("a", "b"); return family::Pareto{a, b}; }
        if (f == "gamma") { auto [a, b] = two("a", "b"); return family::Gamma{a, b}; }
        if (f == "invgamma") { auto [a, b] = two("a", "b"); return family::InverseGamma{a, b}; }
        if (f == "lognormal") { auto [a, b] = two("mu", "v"); return family::LogNormal{a, b}; }
        if (f == "frechet") { auto [a, b] = two("alpha", "s"); return family::Frechet{a, b}; }
        if (f == "beta") { auto [a, b] = two("a", "b"); return family::Beta{a, b}; }
        if (f == "weibull") { auto [a, b] = two("a", "b"); return family::Weibull{a, b}; }
        if (f == "f") { auto [a, b] = two("a", "b"); return family::F{a, b}; }
    } catch (const MixingError& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown family '" + f + "'");
}

inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir) {
    using namespace config_detail;
    allow_keys(j, "config", {"data", "missing", "prior", "mixing", "algorithm", "k_prime", "iterations", "burn_in",
                             "seed", "replications", "posthoc_impute", "record_weights", "outputs"});
    auto resolve = [&](const Json& v, const std::string& where) {
        if (!v.is_string()) throw ConfigError(where + " must be a path string");
        std::filesystem::path p = v.get<std::string>();
        return p.is_absolute() ? p : base_dir / p;
    };
    RunConfig c;

    if (!j.contains("data")) throw ConfigError("config: missing key 'data'");
    const Json& data = j.at("data");
    allow_keys(data, "data", {"csv", "simulate"});
    if (data.contains("csv") == data.contains("simulate"))
        throw ConfigError("data: exactly one of 'csv' or 'simulate' is required");
    if (data.contains("csv")) {
        c.csv = resolve(data.at("csv"), "data.csv");
        if (!std::filesystem::exists(*c.csv)) throw ConfigError("data.csv: file '" + c.csv->string() + "' does not exist");
    } else {
        const Json& s = data.at("simulate");
        allow_keys(s, "data.simulate", {"n", "d", "p", "coefficients", "sigma", "mixing", "seed"});
        SimulationBlock b;
        if (s.contains("n")) b.n = static_cast<Index>(count(s, "n", "data.simulate"));
        if (s.contains("d")) b.d = static_cast<Index>(count(s, "d", "data.simulate"));
        if (s.contains("p")) b.p = static_cast<Index>(count(s, "p", "data.simulate"));
        if (s.contains("coefficients")) b.coefficients = matrix(s.at("coefficients"), "data.simulate.coefficients");
        if (s.contains("sigma")) b.sigma = matrix(s.at("sigma"), "data.simulate.sigma");
        if (s.contains("mixing")) b.mixing = mixing_from_json(s.at("mixing"), "data.simulate.mixing");
        if (s.contains("seed")) b.seed = count(s, "seed", "data.simulate");
        try {
            b.validate();
        } catch (const Error& e) {
            throw ConfigError(std::string("data.simulate: ") + e.what());
        }
        c.simulate = std::move(b);
    }

    if (j.contains("missing")) {
        const Json& m = j.at("missing");
        if (m.is_string()) {
            if (m.get<std::string>() != "from_file") throw ConfigError("missing must be \"from_file\" or an object");
        } else {
            allow_keys(m, "missing", {"complete_rows"});
            c.complete_rows = static_cast<Index>(count(m, "complete_rows", "missing"));
            if (c.simulate && (*c.complete_rows < 1 || *c.complete_rows > c.simulate->n))
                throw ConfigError("missing.complete_rows must lie in [1, n]");
        }
    }

    if (j.contains("prior")) {
        const Json& p = j.at("prior");
        allow_keys(p, "prior", {"m", "a"});
        if (p.contains("m")) c.prior_m = number(p, "m", "prior");
        if (p.contains("a")) {
            const Json& a = p.at("a");
            if (a.is_string()) {
                if (a.get<std::string>() != "zero") throw ConfigError("prior.a must be \"zero\" or a matrix");
            } else {
                c.prior_a = matrix(a, "prior.a");
            }
        }
    }

    if (!j.contains("mixing")) throw ConfigError("config: missing key 'mixing'");
    c.mixing = mixing_from_json(j.at("mixing"));

    if (j.contains("algorithm")) {
        if (!j.at("algorithm").is_string()) throw ConfigError("algorithm must be \"da\" or \"dai\"");
        c.algorithm = j.at("algorithm").get<std::string>();
        if (c.algorithm != "da" && c.algorithm != "dai") throw ConfigError("algorithm must be \"da\" or \"dai\"");
    }
    if (j.contains("k_prime")) {
        const Json& k = j.at("k_prime");
        if (c.algorithm != "dai") throw ConfigError("k_prime is only meaningful with algorithm \"dai\"");
        if (k.is_string()) {
            if (k.get<std::string>() != "all_ones") throw ConfigError("k_prime must be \"all_ones\" or a 0/1 matrix");
        } else {
            const Matrix m = matrix(k, "k_prime");
            if (!((m.array() == 0.0) || (m.array() == 1.0)).all()) throw ConfigError("k_prime entries must be 0 or 1");
            c.k_prime = (m.array() == 1.0);
        }
    }

    if (!j.contains("iterations")) throw ConfigError("config: missing key 'iterations'");
    c.iterations = count(j, "iterations", "config");
    if (j.contains("burn_in")) c.burn_in = count(j, "burn_in", "config");
    if (j.contains("seed")) c.seed = count(j, "seed", "config");
    if (j.contains("replications")) c.replications = count(j, "replications", "config");
    if (c.iterations == 0) throw ConfigError("iterations must be positive");
    if (c.burn_in >= c.iterations) throw ConfigError("burn_in must be smaller than iterations");
    if (c.replications == 0) throw ConfigError("replications must be positive");
    for (const char* key : {"posthoc_impute", "record_weights"}) {
        if (!j.contains(key)) continue;
        if (!j.at(key).is_boolean()) throw ConfigError(std::string(key) + " must be true or false");
        (std::string(key) == "posthoc_impute" ? c.posthoc_impute : c.record_weights) = j.at(key).get<bool>();
    }

    if (j.contains("outputs")) {
        const Json& o = j.at("outputs");
        allow_keys(o, "outputs", {"draws", "imputations", "report", "dataset"});
        if (o.contains("draws")) c.outputs.draws = resolve(o.at("draws"), "outputs.draws");
        if (o.contains("imputations")) c.outputs.imputations = resolve(o.at("imputations"), "outputs.imputations");
        if (o.contains("report")) c.outputs.report = resolve(o.at("report"), "outputs.report");
        if (o.contains("dataset")) c.outputs.dataset = resolve(o.at("dataset"), "outputs.dataset");
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace robustda
