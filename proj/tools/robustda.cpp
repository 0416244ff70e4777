// Command-line entry point.
//
//   robustda run <config.json>       checks, chains, diagnostics, outputs
//   robustda check <config.json>     structure and condition report only
//   robustda simulate <config.json>  write the configured dataset as CSV

#include "robustda/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace robustda;

int do_run(const std::string& path) {
    const RunConfig cfg = load_config(path);
    const std::size_t threads = worker_threads();
    std::cerr << "robustda: " << cfg.algorithm << ", " << cfg.replications << " replication(s) of " << cfg.iterations
              << " iterations on " << threads << " thread(s)\n";
    const RunResult res = execute(cfg, threads);
    write_outputs(cfg, res);
    for (const auto& w : res.report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    if (!cfg.outputs.report) std::cout << res.report.dump(2) << '\n';
    return 0;
}

int do_check(const std::string& path) {
    const RunConfig cfg = load_config(path);
    const Dataset data = prepare_data(cfg).data;
    std::vector<std::string> warnings;
    Json rep = condition_report(cfg, data, warnings);
    rep["warnings"] = warnings;
    std::cout << rep.dump(2) << '\n';
    return rep["mixing"]["h2"].get<bool>() ? 0 : 3;
}

int do_simulate(const std::string& path) {
    const RunConfig cfg = load_config(path);
    if (!cfg.simulate) throw ConfigError("simulate needs a data.simulate block");
    const Dataset data = prepare_data(cfg).data;
    if (cfg.outputs.dataset) {
        RunResult res;
        res.data = data;
        RunConfig only = cfg;
        only.outputs = {};
        only.outputs.dataset = cfg.outputs.dataset;
        write_outputs(only, res);
    } else {
        write_dataset_csv(std::cout, data);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust multivariate regression with incomplete responses: DA and DAI samplers"};
    app.require_subcommand(1);
    std::string config;
    auto* run = app.add_subcommand("run", "run the configured chains and write draws, imputations and report");
    run->add_option("config", config, "JSON run configuration")->required();
    auto* check = app.add_subcommand("check", "report structure and mixing conditions without sampling");
    check->add_option("config", config, "JSON run configuration")->required();
    auto* sim = app.add_subcommand("simulate", "emit the configured dataset as CSV");
    sim->add_option("config", config, "JSON run configuration")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return do_run(config);
        if (check->parsed()) return do_check(config);
        if (sim->parsed()) return do_simulate(config);
    } catch (const Error& e) {
        std::cerr << "error [" << e.module() << "]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error [cli]: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
