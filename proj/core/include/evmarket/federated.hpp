// Synchronous federated training loop: per-station full-batch gradients on a
// shared global model, fixed-order mean aggregation, one Adam update per
// epoch, loss-window stopping, RMSE evaluation, and byte-count overhead
// accounting against the pooled-upload baseline.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evmarket/ingest.hpp"
#include "evmarket/neuralnet.hpp"

namespace evmarket::fed {

struct GradientUpdate {
    std::size_t source = 0;  // shard ordinal, 0-based
    long epoch = 0;
    nn::Gradients grads;
};

struct Shard {
    std::string cs_id;
    ingest::EncodedDataset data;
};

struct FederationConfig {
    long epochs_max = 200;
    int convergence_window = 5;
    double convergence_tol = 1e-4;  // relative loss change over the window
    std::vector<int> hidden_sizes = {64, 64};
    double dropout_rate = 0.15;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double learning_rate = 0.01;
    double epsilon = 1e-8;
    bool parallel_gradients = true;
};

// Component-wise mean (1/I) * sum of updates, summed in ascending source
// order. Sources must be exactly {0..I-1} for a single epoch.
nn::Gradients aggregate(const std::vector<GradientUpdate>& updates);

struct EpochRecord {
    long epoch = 0;
    std::vector<double> cs_losses;  // dropout-off SSE per shard
};

struct OverheadLedger {
    long rounds = 0;                       // gradient-exchange rounds executed
    std::size_t cs_count = 0;              // I
    std::size_t model_scalars = 0;         // |psi|
    std::vector<std::size_t> shard_rows;   // N_i
    std::size_t feature_width = 0;         // F
};

struct TrainResult {
    nn::ModelParams model;
    std::vector<EpochRecord> history;
    OverheadLedger ledger;
    bool converged = false;  // stopped by the loss window rather than epochs_max
};

TrainResult train_dfel(const std::vector<Shard>& shards,
                       const FederationConfig& config, std::uint64_t seed);

// Same network and optimizer on the pooled dataset; coincides exactly with
// train_dfel on a single shard for the same seed.
TrainResult train_centralized(const ingest::EncodedDataset& pooled,
                              const FederationConfig& config,
                              std::uint64_t seed);

double rmse(const nn::ModelParams& model, const ingest::EncodedDataset& test);

struct OverheadReport {
    double federated_bytes = 0.0;    // rounds * I * |psi| * 8
    double centralized_bytes = 0.0;  // sum_i N_i * (F+1) * 8
    double reduction_pct = 0.0;      // 100 * (1 - federated/centralized)
};

OverheadReport overhead_report(const OverheadLedger& ledger);

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochRecord>& history,
                       const std::vector<std::string>& cs_ids);

}  // namespace evmarket::fed
