// Run configuration: one JSON file drives the whole gen-data -> train ->
// market -> experiment chain. Relative paths resolve against the config
// file's directory; --out overrides the output directory.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evmarket::config {

struct RunConfig {
    std::uint64_t seed = 42;

    std::filesystem::path transactions = "transactions.csv";
    std::filesystem::path locations = "locations.csv";
    std::filesystem::path out_dir = "out";

    struct Synth {
        int n_stations = 6;
        int n_tx = 30000;
        double lat_min = 56.44, lat_max = 56.50;
        double lon_min = -3.08, lon_max = -2.92;
    } synth;

    struct Learning {
        std::vector<int> hidden_layers = {12, 12};
        double dropout_rate = 0.15;
        double learning_rate = 0.01;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
        long epochs_max = 25;
        int convergence_window = 5;
        double convergence_tol = 1e-4;
        double train_ratio = 0.8;
    } learning;

    struct Clustering {
        int k = 2;
        int size_min = 2;
        int size_max = 4;
    } clustering;

    struct Market {
        int phi_max = 10;
        int true_type = 5;
        double s_max = 500.0;
        double zeta = 0.022;
        double rho_unit = 200.0;
        double varrho = 220.0;
        double kappa = 1e-6;
        int max_rounds = 200;
    } market;

    struct Experiment {
        std::vector<int> type_sweep = {5, 10};
        std::vector<int> price_sweep = {1, 5, 10, 15, 20, 25, 30};
    } experiment;

    void validate() const;
};

RunConfig load(const std::filesystem::path& path);
void save(const std::filesystem::path& path, const RunConfig& config);

}  // namespace evmarket::config
