// Command-line front end for the experiment harness.
//
//   mobprof run <experiment> --config <path> --out <dir> --seed <int>
//   mobprof list-experiments
//   mobprof validate-config <path> [--experiment <name>]
//
// Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mobprof/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void report(const mobprof::ConfigError& e) {
    std::cerr << "configuration is invalid:\n";
    for (const std::string& p : e.problems()) std::cerr << "  - " << p << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Motion profiling experiment runner"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mobprof::kVersion));

    std::string experiment;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    CLI::App* run = app.add_subcommand("run", "run one experiment and write results.json plus CSV files");
    run->add_option("experiment", experiment, "experiment name (see list-experiments)")->required();
    run->add_option("--config", config_path, "JSON configuration file; defaults are used when omitted");
    run->add_option("--out", out_dir, "output directory (overrides output_dir)");
    run->add_option("--seed", seed, "master seed (overrides the config)");
    run->add_option("--workers", workers, "worker threads, 0 = hardware concurrency");

    app.add_subcommand("list-experiments", "print the experiment names");

    std::string validate_path;
    std::string validate_experiment;
    CLI::App* check = app.add_subcommand("validate-config", "check a configuration file without running it");
    check->add_option("config", validate_path, "JSON configuration file")->required();
    check->add_option("--experiment", validate_experiment, "experiment the file is meant for");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    if (app.got_subcommand("list-experiments")) {
        for (const auto& e : mobprof::experiment_catalog()) std::cout << e.name << "\t" << e.description << '\n';
        return 0;
    }

    if (app.got_subcommand("validate-config")) {
        try {
            const mobprof::ExperimentConfig c = mobprof::load_config(validate_path, validate_experiment);
            std::cout << "ok: " << c.experiment << '\n';
            return 0;
        } catch (const mobprof::ConfigError& e) {
            report(e);
            return kExitConfig;
        }
    }

    mobprof::ExperimentConfig config;
    try {
        if (config_path.empty()) {
            nlohmann::json doc = nlohmann::json::object();
            if (seed) doc["seed"] = *seed;
            config = mobprof::parse_config(doc, experiment);
        } else {
            // The seed flag may supply a seed the file lacks, so validation
            // happens after the override.
            std::ifstream in(config_path);
            if (!in) throw mobprof::ConfigError({"config: cannot open '" + config_path + "'"});
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw mobprof::ConfigError({std::string("config: not valid JSON: ") + e.what()});
            }
            if (seed && doc.is_object()) doc["seed"] = *seed;
            config = mobprof::parse_config(doc, experiment);
        }
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (workers) config.workers = *workers;
        if (auto bad = mobprof::validate(config); !bad.empty()) throw mobprof::ConfigError(bad);
    } catch (const mobprof::ConfigError& e) {
        report(e);
        return kExitConfig;
    }

    try {
        const mobprof::ExperimentResult result = mobprof::run_experiment(config);
        mobprof::write_outputs(config, result, config.output_dir);
        std::cout << "wrote " << config.output_dir << "/results.json\n";
        return 0;
    } catch (const mobprof::ExperimentFailure& e) {
        std::cerr << "experiment failed: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const mobprof::ConfigError& e) {
        report(e);
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "experiment failed (seed " << *config.seed << "): " << e.what() << '\n';
        return kExitRuntime;
    }
}
