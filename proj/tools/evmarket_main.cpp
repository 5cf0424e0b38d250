// evmarket: synthetic data generation, federated demand training, station
// clustering, the contract market, and the experiment sweeps, driven by one
// JSON config.
#include <cstdlib>
#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "evmarket/config.hpp"
#include "evmarket/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"EV charging market pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    app.add_option("--config", config_path, "JSON config file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_override, "override output directory");

    auto* gen = app.add_subcommand("gen-data", "write synthetic transaction and location CSVs");
    auto* train = app.add_subcommand("train", "train the demand model and emit predictions");
    std::string mode = "dfel";
    train->add_option("--mode", mode, "dfel | dfel-cluster | centralized")
        ->check(CLI::IsMember({"dfel", "dfel-cluster", "centralized"}));
    auto* cluster = app.add_subcommand("cluster", "size-constrained station clustering");
    auto* market = app.add_subcommand("market", "run the contract market and baselines");
    std::string demands_csv;
    market->add_option("--demands", demands_csv,
                       "demands CSV (default: <out>/demands.csv)");
    auto* experiment = app.add_subcommand("experiment", "run experiment sweeps");
    std::string experiment_name = "figure-suite";
    experiment->add_option("--name", experiment_name,
                           "type-sweep | price-sweep | figure-suite")
        ->check(CLI::IsMember({"type-sweep", "price-sweep", "figure-suite"}));

    CLI11_PARSE(app, argc, argv);

    auto cfg = evmarket::config::load(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;

    evmarket::pipeline::CommandResult result;
    if (gen->parsed()) {
        result = evmarket::pipeline::cmd_gen_data(cfg);
    } else if (train->parsed()) {
        result = evmarket::pipeline::cmd_train(
            cfg, evmarket::pipeline::parse_train_mode(mode));
    } else if (cluster->parsed()) {
        result = evmarket::pipeline::cmd_cluster(cfg);
    } else if (market->parsed()) {
        const auto path = demands_csv.empty() ? (cfg.out_dir / "demands.csv").string()
                                              : demands_csv;
        result = evmarket::pipeline::cmd_market(cfg, path);
    } else if (experiment->parsed()) {
        result = evmarket::pipeline::cmd_experiment(cfg, experiment_name);
    }

    for (const auto& note : result.notes) std::cout << note << '\n';
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
