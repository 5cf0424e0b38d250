#include "evmarket/federated.hpp"

#include <cmath>
#include <future>
#include <stdexcept>

#include "evmarket/csv.hpp"
#include "evmarket/rng.hpp"

namespace evmarket::fed {

nn::Gradients aggregate(const std::vector<GradientUpdate>& updates) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
    const std::size_t n = updates.size();
    std::vector<const GradientUpdate*> by_source(n, nullptr);
    const long epoch = updates.front().epoch;
    for (const auto& u : updates) {
        if (u.epoch != epoch) {
            throw std::invalid_argument("aggregate: epoch mismatch across updates");
        }
        if (u.source >= n) {
            throw std::invalid_argument("aggregate: missing update (source index out of range)");
        }
        if (by_source[u.source] != nullptr) {
            throw std::invalid_argument("aggregate: duplicate source " +
                                        std::to_string(u.source));
        }
        by_source[u.source] = &u;
    }

    nn::Gradients sum = by_source[0]->grads;
    for (std::size_t i = 1; i < n; ++i) sum.add_scaled(by_source[i]->grads, 1.0);
    sum.scale(1.0 / static_cast<double>(n));
    return sum;
}

namespace {

bool window_converged(const std::vector<EpochRecord>& history, int window,
                      double tol) {
    if (static_cast<long>(history.size()) < window + 1) return false;
    const auto& now = history.back().cs_losses;
    const auto& past = history[history.size() - 1 - static_cast<std::size_t>(window)].cs_losses;
    for (std::size_t i = 0; i < now.size(); ++i) {
        const double denom = std::max(std::abs(past[i]), 1e-12);
        if (!(std::abs(now[i] - past[i]) / denom < tol)) return false;
    }
    return true;
}

}  // namespace

TrainResult train_dfel(const std::vector<Shard>& shards,
                       const FederationConfig& config, std::uint64_t seed) {
    if (shards.empty()) throw std::invalid_argument("train_dfel: empty shard set");
    for (const auto& s : shards) {
        if (s.data.size() == 0) {
            throw std::invalid_argument("train_dfel: empty shard " + s.cs_id);
        }
    }
    if (config.epochs_max < 1) {
        throw std::invalid_argument("train_dfel: epochs_max must be >= 1");
    }

    const std::size_t n_cs = shards.size();
    const int input_width = static_cast<int>(shards.front().data.features.cols());
    std::vector<int> sizes;
    sizes.push_back(input_width);
    for (int h : config.hidden_sizes) sizes.push_back(h);
    sizes.push_back(1);

    TrainResult result;
    result.model = nn::init_model(sizes, config.dropout_rate, seed);
    nn::AdamState adam = nn::init_adam(result.model, config.beta1, config.beta2,
                                       config.learning_rate, config.epsilon);

    result.ledger.cs_count = n_cs;
    result.ledger.model_scalars = result.model.scalar_count();
    result.ledger.feature_width = static_cast<std::size_t>(input_width);
    for (const auto& s : shards) result.ledger.shard_rows.push_back(s.data.size());

    for (long epoch = 0; epoch < config.epochs_max; ++epoch) {
        std::vector<GradientUpdate> updates(n_cs);
        std::vector<double> losses(n_cs);

        // Local passes may run concurrently; each writes only its own slot and
        // the aggregation below consumes them in fixed source order.
        auto local_pass = [&](std::size_t i) {
            const auto& shard = shards[i];
            const std::uint64_t mask_seed = rng::derive(seed, "mask", i, epoch);
            updates[i].source = i;
            updates[i].epoch = epoch;
            updates[i].grads = nn::gradient(result.model, shard.data.features,
                                            shard.data.labels, mask_seed, true);
            losses[i] = nn::loss(result.model, shard.data.features, shard.data.labels);
        };
        if (config.parallel_gradients && n_cs > 1) {
            std::vector<std::future<void>> jobs;
            jobs.reserve(n_cs);
            for (std::size_t i = 0; i < n_cs; ++i) {
                jobs.push_back(std::async(std::launch::async, local_pass, i));
            }
            for (auto& j : jobs) j.get();
        } else {
            for (std::size_t i = 0; i < n_cs; ++i) local_pass(i);
        }

        const nn::Gradients global_grad = aggregate(updates);
        nn::adam_step(adam, result.model, global_grad);
        result.ledger.rounds += 1;

        result.history.push_back({epoch, losses});
        if (window_converged(result.history, config.convergence_window,
                             config.convergence_tol)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

TrainResult train_centralized(const ingest::EncodedDataset& pooled,
                              const FederationConfig& config,
                              std::uint64_t seed) {
    if (pooled.size() == 0) {
        throw std::invalid_argument("train_centralized: empty dataset");
    }
    return train_dfel({Shard{"pooled", pooled}}, config, seed);
}

double rmse(const nn::ModelParams& model, const ingest::EncodedDataset& test) {
    if (test.size() == 0) throw std::invalid_argument("rmse: empty test set");
    const Eigen::VectorXd pred = nn::forward(model, test.features);
    const double mse = (pred - test.labels).squaredNorm() /
                       static_cast<double>(test.size());
    return std::sqrt(mse);
}

OverheadReport overhead_report(const OverheadLedger& ledger) {
    OverheadReport r;
    r.federated_bytes = static_cast<double>(ledger.rounds) *
                        static_cast<double>(ledger.cs_count) *
                        static_cast<double>(ledger.model_scalars) * 8.0;
    double rows_cost = 0.0;
    for (std::size_t n : ledger.shard_rows) {
        rows_cost += static_cast<double>(n) *
                     static_cast<double>(ledger.feature_width + 1) * 8.0;
    }
    r.centralized_bytes = rows_cost;
    r.reduction_pct =
        r.centralized_bytes > 0.0
            ? 100.0 * (1.0 - r.federated_bytes / r.centralized_bytes)
            : 0.0;
    return r;
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochRecord>& history,
                       const std::vector<std::string>& cs_ids) {
    csv::Table t;
    t.header = {"epoch", "cs_id", "loss"};
    for (const auto& rec : history) {
        for (std::size_t i = 0; i < rec.cs_losses.size(); ++i) {
            t.rows.push_back({std::to_string(rec.epoch), cs_ids[i],
                              csv::format_double(rec.cs_losses[i], 12)});
        }
    }
    csv::write_file(path, t);
}

}  // namespace evmarket::fed
