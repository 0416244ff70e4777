#pragma once

// Configuration-driven pipeline behind the command-line tool: load or
// simulate data, check structure and mixing conditions, run replicated
// chains and assemble the JSON report.

#include "robustda/config.hpp"
#include "robustda/diagnostics.hpp"
#include "robustda/io.hpp"
#include "robustda/missing.hpp"
#include "robustda/mixing.hpp"
#include "robustda/samplers.hpp"
#include "robustda/simulate.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace robustda {

inline constexpr const char* kThreadsEnv = "ROBUSTDA_THREADS";

struct PreparedData {
    Dataset data;
    std::string source;
};

inline PreparedData prepare_data(const RunConfig& cfg) {
    PreparedData out;
    if (cfg.csv) {
        out.data = ingest_csv(cfg.csv->string()).data;
        out.source = cfg.csv->string();
    } else {
        out.data = simulate_dataset(*cfg.simulate);
        out.source = "simulate";
    }
    if (cfg.complete_rows) {
        if (*cfg.complete_rows < 1 || *cfg.complete_rows > out.data.n())
            throw ConfigError("missing.complete_rows must lie in [1, " + std::to_string(out.data.n()) + "]");
        out.data = apply_structure(out.data, complete_rows_structure(out.data.n(), out.data.d(), *cfg.complete_rows));
    }
    return out;
}

inline Json h1_to_json(const H1Report& r) {
    Json pats = Json::array();
    for (const auto& p : r.patterns)
        pats.push_back({{"pattern", p.pattern}, {"rows", p.rows}, {"rank", p.rank}, {"required_rank", p.required_rank},
                        {"rank_ok", p.rank_ok}, {"count_ok", p.count_ok}, {"df", p.df}});
    return {{"pass", r.pass}, {"patterns", pats}};
}

inline Json mask_to_json(const Mask& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j) ? 1 : 0);
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<Index> one_based(const std::vector<Index>& v) {
    std::vector<Index> out(v);
    for (auto& e : out) ++e;
    return out;
}

/// Structure and condition report; no sampling. Fills `warnings`.
inline Json condition_report(const RunConfig& cfg, const Dataset& data, std::vector<std::string>& warnings) {
    const Prior prior = cfg.prior(data.d());
    const MissingStructure ms = MissingStructure::of(data);
    Json rep;
    rep["dataset"] = {{"n", data.n()}, {"d", data.d()}, {"p", data.p()},
                      {"missing_entries", static_cast<Index>((!data.observed()).count())},
                      {"min_observed", data.min_observed_count()}};
    rep["prior"] = {{"m", prior.m}, {"a_is_zero", prior.a.isZero(0.0)}};

    Json st;
    st["monotone"] = is_monotone(ms);
    const auto dec = try_monotonize(ms);
    st["monotonizable"] = dec.has_value();
    if (dec) {
        st["row_order"] = one_based(dec->row_permutation);
        st["column_order"] = one_based(dec->column_permutation);
        st["rows_per_pattern"] = dec->n_per_pattern;
        const Dataset arranged = permute(data, *dec);
        st["h1"] = h1_to_json(check_h1(*dec, arranged, prior));
    }
    if (data.fully_observed()) st["h1_complete"] = check_h1_full(data, prior);
    const auto witness = check_proposition1(ms, data, prior);
    Json w = {{"found", witness.witness.has_value()}, {"strict", witness.strict}};
    if (witness.witness) w["structure"] = mask_to_json(witness.witness->mask());
    st["proposition1_witness"] = w;
    rep["structure"] = st;

    const auto v = verdict_theorem1(cfg.mixing, data.n(), data.p(), data.d(), prior.m, data.min_observed_count());
    const auto oc = classify_origin(cfg.mixing);
    rep["mixing"] = {{"family", std::string(cfg.mixing.name())},
                     {"description", cfg.mixing.describe()},
                     {"h2", v.h2_ok},
                     {"h2_rule", h2_rule(cfg.mixing)},
                     {"origin_class", oc.describe()},
                     {"c1", v.c1},
                     {"theorem1", v.geometrically_ergodic() ? "geometrically_ergodic" : "not_established"},
                     {"reason", v.reason}};

    if (v.h2_ok && !v.geometrically_ergodic())
        warnings.push_back("geometric ergodicity not established: " + v.reason);
    if (cfg.algorithm == "da" && !dec)
        warnings.push_back("structure cannot be rearranged into a monotone pattern; DA is not applicable");
    if (cfg.algorithm == "dai" && !witness.witness)
        warnings.push_back("no monotone sub-structure satisfying the rank/count condition was found");
    return rep;
}

// ---------------------------------------------------------------------------
// Chains.

/// One chain per replication; replication r uses seed + r.
inline ChainOutput run_replication(const RunConfig& cfg, const Dataset& data, std::size_t r) {
    const Prior prior = cfg.prior(data.d());
    const std::uint64_t seed = cfg.seed + r;
    if (cfg.algorithm == "dai") {
        DaiConfig dc;
        dc.iterations = cfg.iterations;
        dc.burn_in = cfg.burn_in;
        dc.seed = seed;
        dc.record_weights = cfg.record_weights;
        dc.k_prime = cfg.k_prime ? MissingStructure(*cfg.k_prime) : MissingStructure::all_observed(data.n(), data.d());
        return run_dai(data, prior, cfg.mixing, dc, default_initial_state(data));
    }

    DaConfig dc;
    dc.iterations = cfg.iterations;
    dc.burn_in = cfg.burn_in;
    dc.seed = seed;
    dc.record_weights = cfg.record_weights;
    dc.posthoc_impute = cfg.posthoc_impute;
    const MissingStructure ms = MissingStructure::of(data);
    const auto dec = try_monotonize(ms);
    if (!dec) throw StructureError("DA requires a structure that can be rearranged into a monotone pattern");
    if (dec->identity_permutations()) return run_da(data, prior, cfg.mixing, dc, default_initial_state(data));

    // Run on the rearranged data, then map states and cells back.
    const Dataset arranged = permute(data, *dec);
    Matrix a_perm(prior.a.rows(), prior.a.cols());
    for (Index i = 0; i < a_perm.rows(); ++i)
        for (Index j = 0; j < a_perm.cols(); ++j)
            a_perm(i, j) = prior.a(dec->column_permutation[static_cast<std::size_t>(i)],
                                   dec->column_permutation[static_cast<std::size_t>(j)]);
    ChainOutput out = run_da(arranged, Prior(prior.m, a_perm), cfg.mixing, dc, default_initial_state(arranged));
    for (auto& s : out.states) s = unpermute_state(s, dec->column_permutation);
    for (auto& c : out.imputed_cells)
        c = {dec->row_permutation[static_cast<std::size_t>(c.row)], dec->column_permutation[static_cast<std::size_t>(c.col)]};
    if (out.imputations) {
        // Restore row-major original order of the imputed cells.
        std::vector<std::size_t> order(out.imputed_cells.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& ca = out.imputed_cells[a];
            const auto& cb = out.imputed_cells[b];
            return ca.row != cb.row ? ca.row < cb.row : ca.col < cb.col;
        });
        std::vector<Cell> cells;
        for (auto k : order) cells.push_back(out.imputed_cells[k]);
        for (auto& v : *out.imputations) {
            Vector nv(v.size());
            for (std::size_t k = 0; k < order.size(); ++k) nv(static_cast<Index>(k)) = v(static_cast<Index>(order[k]));
            v = std::move(nv);
        }
        out.imputed_cells = std::move(cells);
    }
    return out;
}

inline std::size_t worker_threads() {
    const char* env = std::getenv(kThreadsEnv);
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

/// Runs every replication; workers pick replications from a shared counter.
/// Results are independent of the thread count.
inline std::vector<ChainOutput> run_replications(const RunConfig& cfg, const Dataset& data, std::size_t threads) {
    std::vector<ChainOutput> chains(cfg.replications);
    std::vector<std::exception_ptr> errors(cfg.replications);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next++) < cfg.replications;) {
            try {
                chains[r] = run_replication(cfg, data, r);
            } catch (...) {
                errors[r] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(threads, cfg.replications));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

inline Json ess_to_json(const EssReport& r) {
    Json uni = Json::object(), pm = Json::object();
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        uni[r.names[k]] = r.univariate[k].value;
        pm[r.names[k]] = r.per_minute(r.univariate[k].value);
    }
    Json j = {{"draws", r.draws},       {"minutes", r.minutes},
              {"ess", uni},             {"ess_per_minute", pm},
              {"joint_ess", r.joint.value}, {"joint_ess_per_minute", r.per_minute(r.joint.value)}};
    Json flags = Json::array();
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        if (r.univariate[k].capped) flags.push_back(r.names[k] + ": capped at 1.1 N");
        if (r.univariate[k].degenerate) flags.push_back(r.names[k] + ": zero variance");
    }
    if (r.joint.capped) flags.push_back("joint: capped at 1.1 N");
    if (r.joint.degenerate) flags.push_back("joint: degenerate covariance");
    if (!flags.empty()) j["flags"] = flags;
    return j;
}

/// Output path for replication r: the configured path itself for r = 0,
/// otherwise "<stem>.rep<r><ext>".
inline std::filesystem::path replication_path(const std::filesystem::path& base, std::size_t r) {
    if (r == 0) return base;
    std::filesystem::path p = base;
    p.replace_filename(base.stem().string() + ".rep" + std::to_string(r) + base.extension().string());
    return p;
}

struct RunResult {
    Json report;
    std::vector<ChainOutput> chains;
    Dataset data;
};

/// Full pipeline without touching the filesystem for outputs.
inline RunResult execute(const RunConfig& cfg, std::size_t threads = 1) {
    RunResult res;
    res.data = prepare_data(cfg).data;
    std::vector<std::string> warnings;
    res.report = condition_report(cfg, res.data, warnings);
    if (!check_h2(cfg.mixing, res.data.d()))
        throw MixingError("Condition H2 fails: " + std::string(cfg.mixing.name()) + " " + h2_rule(cfg.mixing) +
                          "; the latent-weight conditional may be improper, refusing to run");

    res.chains = run_replications(cfg, res.data, threads);
    Json chains = Json::array();
    std::vector<double> joint;
    for (const auto& c : res.chains) {
        for (const auto& w : c.meta.warnings)
            if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
        Json cj = {{"seed", c.meta.seed}, {"algorithm", c.meta.algorithm}, {"iterations", c.meta.iterations},
                   {"burn_in", c.meta.burn_in}, {"seconds", c.meta.duration.count()}};
        if (c.meta.iterations >= kMinEssLength) {
            const auto ess = ess_report(c);
            cj["diagnostics"] = ess_to_json(ess);
            joint.push_back(ess.joint.value);
        }
        chains.push_back(cj);
    }
    res.report["run"] = {{"algorithm", cfg.algorithm}, {"iterations", cfg.iterations}, {"burn_in", cfg.burn_in},
                         {"seed", cfg.seed}, {"replications", cfg.replications}, {"threads", threads}};
    res.report["chains"] = chains;
    if (!joint.empty()) res.report["median_joint_ess"] = detail::median(joint);
    res.report["warnings"] = warnings;
    return res;
}

/// Writes every configured output. Each file is written to a temporary
/// sibling first and renamed into place once complete.
inline void write_outputs(const RunConfig& cfg, const RunResult& res) {
    auto emit = [](const std::filesystem::path& path, auto&& body) {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        const std::filesystem::path tmp = path.string() + ".partial";
        {
            auto out = csv::open_output(tmp.string());
            body(out);
            out.flush();
            if (!out) throw IngestionError("write to '" + tmp.string() + "' failed");
        }
        std::filesystem::rename(tmp, path);
    };
    for (std::size_t r = 0; r < res.chains.size(); ++r) {
        if (cfg.outputs.draws)
            emit(replication_path(*cfg.outputs.draws, r), [&](std::ostream& o) { write_draws_csv(o, res.chains[r]); });
        if (cfg.outputs.imputations)
            emit(replication_path(*cfg.outputs.imputations, r),
                 [&](std::ostream& o) { write_imputations_csv(o, res.chains[r]); });
    }
    if (cfg.outputs.dataset) emit(*cfg.outputs.dataset, [&](std::ostream& o) { write_dataset_csv(o, res.data); });
    if (cfg.outputs.report) emit(*cfg.outputs.report, [&](std::ostream& o) { o << res.report.dump(2) << '\n'; });
}

}  // namespace robustda
