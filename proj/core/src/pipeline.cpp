#include "evmarket/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "evmarket/baselines.hpp"
#include "evmarket/clustering.hpp"
#include "evmarket/csv.hpp"
#include "evmarket/federated.hpp"
#include "evmarket/ingest.hpp"
#include "evmarket/io.hpp"
#include "evmarket/market.hpp"
#include "evmarket/neuralnet.hpp"
#include "evmarket/rng.hpp"
#include "json.hpp"

namespace evmarket::pipeline {

using nlohmann::ordered_json;

namespace {

// The only file that carries a timestamp; everything else is reproducible
// byte-for-byte from config + seed.
void write_run_meta(const config::RunConfig& cfg, const std::string& command) {
    const auto now = std::chrono::system_clock::now();
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
            .count();
    ordered_json j;
    j["command"] = command;
    j["unix_time"] = secs;
    j["seed"] = cfg.seed;
    std::ofstream out(cfg.out_dir / "run_meta.json");
    out << j.dump(2) << '\n';
}

void ensure_out_dir(const config::RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
}

std::vector<std::string> registry_from_locations(
    const std::vector<ingest::StationLocation>& locations) {
    std::vector<std::string> reg;
    reg.reserve(locations.size());
    for (const auto& l : locations) reg.push_back(l.cs_id);
    return reg;
}

market::SgpTypeModel model_from_config(const config::RunConfig& cfg) {
    return market::SgpTypeModel::uniform(cfg.market.phi_max, cfg.market.s_max,
                                         cfg.market.zeta, cfg.market.true_type);
}

market::MarketConfig market_config(const config::RunConfig& cfg,
                                   std::vector<double> demands) {
    market::MarketConfig m = market::MarketConfig::defaults(std::move(demands));
    std::fill(m.rho_unit.begin(), m.rho_unit.end(), cfg.market.rho_unit);
    std::fill(m.varrho.begin(), m.varrho.end(), cfg.market.varrho);
    m.kappa = cfg.market.kappa;
    m.max_rounds = cfg.market.max_rounds;
    return m;
}

fed::FederationConfig federation_config(const config::RunConfig& cfg) {
    fed::FederationConfig f;
    f.epochs_max = cfg.learning.epochs_max;
    f.convergence_window = cfg.learning.convergence_window;
    f.convergence_tol = cfg.learning.convergence_tol;
    f.hidden_sizes = cfg.learning.hidden_layers;
    f.dropout_rate = cfg.learning.dropout_rate;
    f.beta1 = cfg.learning.beta1;
    f.beta2 = cfg.learning.beta2;
    f.learning_rate = cfg.learning.learning_rate;
    f.epsilon = cfg.learning.epsilon;
    return f;
}

// Rows of the encoded dataset grouped by the station one-hot block.
std::vector<std::vector<std::size_t>> rows_by_station(
    const ingest::EncodedDataset& ds) {
    std::vector<std::vector<std::size_t>> groups(ds.layout.station_count);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t s = 0; s < ds.layout.station_count; ++s) {
            if (ds.features(static_cast<Eigen::Index>(r),
                            static_cast<Eigen::Index>(s)) > 0.5) {
                groups[s].push_back(r);
                break;
            }
        }
    }
    return groups;
}

int station_of_row(const ingest::EncodedDataset& ds, std::size_t r) {
    for (std::size_t s = 0; s < ds.layout.station_count; ++s) {
        if (ds.features(static_cast<Eigen::Index>(r),
                        static_cast<Eigen::Index>(s)) > 0.5) {
            return static_cast<int>(s);
        }
    }
    return -1;
}

int hour_of_row(const ingest::EncodedDataset& ds, std::size_t r) {
    const auto off = static_cast<Eigen::Index>(ds.layout.hour_offset());
    for (int h = 0; h < 24; ++h) {
        if (ds.features(static_cast<Eigen::Index>(r), off + h) > 0.5) return h;
    }
    return -1;
}

// Next-interval demand per station: expected transactions per hour slot from
// the training split times the model's predicted energy for the day after the
// last observed date, summed over the 24 hours. kWh -> MWh.
std::vector<double> predict_demands(
    const std::vector<const nn::ModelParams*>& model_of_station,
    const ingest::EncodedDataset& train,
    const std::vector<ingest::TransactionRecord>& records, double train_ratio) {
    const std::size_t n_stations = train.layout.station_count;

    ingest::Date last{1970, 1, 1};
    std::set<std::string> dates;
    for (const auto& r : records) {
        dates.insert(r.date.to_string());
        if (r.date > last) last = r.date;
    }
    const int dow_next = last.next_day().day_of_week();
    const double n_days =
        std::max(1.0, train_ratio * static_cast<double>(dates.size()));

    Eigen::MatrixXd counts =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_stations), 24);
    for (std::size_t r = 0; r < train.size(); ++r) {
        const int s = station_of_row(train, r);
        const int h = hour_of_row(train, r);
        if (s >= 0 && h >= 0) counts(s, h) += 1.0;
    }

    std::vector<double> demands(n_stations, 0.0);
    const auto width = static_cast<Eigen::Index>(train.layout.width());
    for (std::size_t s = 0; s < n_stations; ++s) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(24, width);
        for (int h = 0; h < 24; ++h) {
            x(h, static_cast<Eigen::Index>(s)) = 1.0;
            x(h, static_cast<Eigen::Index>(train.layout.dow_offset() + dow_next)) = 1.0;
            x(h, static_cast<Eigen::Index>(train.layout.hour_offset() + h)) = 1.0;
        }
        const Eigen::VectorXd pred = nn::forward(*model_of_station[s], x);
        double kwh = 0.0;
        for (int h = 0; h < 24; ++h) {
            const double per_tx = std::max(0.0, pred(h));
            kwh += counts(static_cast<Eigen::Index>(s), h) / n_days * per_tx;
        }
        demands[s] = kwh / 1000.0;
    }
    return demands;
}

double mean_predictor_rmse(const ingest::EncodedDataset& train,
                           const ingest::EncodedDataset& test) {
    const double mean = train.labels.mean();
    const double mse =
        (test.labels.array() - mean).square().sum() / static_cast<double>(test.size());
    return std::sqrt(mse);
}

void save_model_json(const std::filesystem::path& path,
                     const nn::ModelParams& model) {
    std::ofstream out(path);
    out << model.to_json().dump(2) << '\n';
}

struct AuditEntry {
    std::string name;
    bool pass;
    double value;
};

int finalize_audits(const config::RunConfig& cfg,
                    const std::vector<AuditEntry>& audits,
                    CommandResult& result) {
    bool all_pass = true;
    for (const auto& a : audits) all_pass = all_pass && a.pass;
    if (!all_pass) {
        ordered_json j;
        j["status"] = "audit_failure";
        auto arr = ordered_json::array();
        for (const auto& a : audits) {
            arr.push_back({{"name", a.name}, {"pass", a.pass}, {"value", a.value}});
        }
        j["audits"] = std::move(arr);
        std::ofstream out(cfg.out_dir / "failure_report.json");
        out << j.dump(2) << '\n';
        result.exit_code = 2;
        result.notes.push_back("audit failure; see failure_report.json");
    }
    return result.exit_code;
}

}  // namespace

TrainMode parse_train_mode(const std::string& name) {
    if (name == "dfel") return TrainMode::dfel;
    if (name == "dfel-cluster") return TrainMode::dfel_cluster;
    if (name == "centralized") return TrainMode::centralized;
    throw std::invalid_argument("unknown train mode: " + name);
}

CommandResult cmd_gen_data(const config::RunConfig& cfg) {
    CommandResult result;
    cfg.validate();
    ensure_out_dir(cfg);

    ingest::SynthParams p;
    p.seed = cfg.seed;
    p.n_stations = cfg.synth.n_stations;
    p.n_tx = cfg.synth.n_tx;
    p.lat_min = cfg.synth.lat_min;
    p.lat_max = cfg.synth.lat_max;
    p.lon_min = cfg.synth.lon_min;
    p.lon_max = cfg.synth.lon_max;
    const ingest::SynthData data = ingest::synth_generate(p);

    if (cfg.transactions.has_parent_path()) {
        std::filesystem::create_directories(cfg.transactions.parent_path());
    }
    if (cfg.locations.has_parent_path()) {
        std::filesystem::create_directories(cfg.locations.parent_path());
    }
    ingest::write_transactions_csv(cfg.transactions, data.records);
    ingest::write_locations_csv(cfg.locations, data.locations);
    write_run_meta(cfg, "gen-data");
    result.notes.push_back("wrote " + cfg.transactions.string());
    result.notes.push_back("wrote " + cfg.locations.string());
    return result;
}

CommandResult cmd_cluster(const config::RunConfig& cfg) {
    CommandResult result;
    cfg.validate();
    ensure_out_dir(cfg);

    const auto locations = ingest::parse_locations(cfg.locations);
    cluster::ClusterProblem problem;
    for (const auto& l : locations) {
        problem.points.push_back({l.cs_id, {l.latitude, l.longitude}});
    }
    problem.k = cfg.clustering.k;
    problem.size_min = cfg.clustering.size_min;
    problem.size_max = cfg.clustering.size_max;

    const auto sol = cluster::cluster_cs(problem, rng::derive(cfg.seed, "cluster"));
    cluster::write_membership_csv(cfg.out_dir / "membership.csv", problem,
                                  sol.membership);
    write_run_meta(cfg, "cluster");
    result.notes.push_back("objective " + csv::format_double(sol.objective));
    return result;
}

CommandResult cmd_train(const config::RunConfig& cfg, TrainMode mode) {
    CommandResult result;
    cfg.validate();
    ensure_out_dir(cfg);

    const auto locations = ingest::parse_locations(cfg.locations);
    const auto registry = registry_from_locations(locations);
    const auto records = ingest::parse_transactions(cfg.transactions, registry);
    const auto dataset = ingest::encode(records, registry);
    const auto [train, test] =
        ingest::split(dataset, cfg.learning.train_ratio, rng::derive(cfg.seed, "split"));

    const fed::FederationConfig fc = federation_config(cfg);
    const auto groups = rows_by_station(train);
    for (std::size_t s = 0; s < groups.size(); ++s) {
        if (groups[s].empty()) {
            throw std::runtime_error("train: station " + registry[s] +
                                     " has no training rows");
        }
    }

    std::vector<const nn::ModelParams*> model_of_station(registry.size(), nullptr);
    std::vector<nn::ModelParams> models;  // stable storage
    double fed_bytes = 0.0;
    double cent_bytes = 0.0;
    ordered_json overhead_detail = ordered_json::array();
    std::string mode_name;

    if (mode == TrainMode::centralized) {
        mode_name = "centralized";
        const auto r = fed::train_centralized(train, fc, rng::derive(cfg.seed, "train"));
        fed::write_history_csv(cfg.out_dir / "history.csv", r.history, {"pooled"});
        save_model_json(cfg.out_dir / "model.json", r.model);
        const auto report = fed::overhead_report(r.ledger);
        io::write_overhead_json(cfg.out_dir / "overhead.json", report, r.ledger);
        fed_bytes = report.federated_bytes;
        cent_bytes = report.centralized_bytes;
        models.push_back(r.model);
        for (auto& m : model_of_station) m = &models.back();
    } else if (mode == TrainMode::dfel) {
        mode_name = "dfel";
        std::vector<fed::Shard> shards;
        for (std::size_t s = 0; s < registry.size(); ++s) {
            shards.push_back({registry[s], ingest::take_rows(train, groups[s])});
        }
        const auto r = fed::train_dfel(shards, fc, rng::derive(cfg.seed, "train"));
        fed::write_history_csv(cfg.out_dir / "history.csv", r.history, registry);
        save_model_json(cfg.out_dir / "model.json", r.model);
        const auto report = fed::overhead_report(r.ledger);
        io::write_overhead_json(cfg.out_dir / "overhead.json", report, r.ledger);
        fed_bytes = report.federated_bytes;
        cent_bytes = report.centralized_bytes;
        models.push_back(r.model);
        for (auto& m : model_of_station) m = &models.back();
    } else {
        mode_name = "dfel-cluster";
        cluster::ClusterProblem problem;
        for (const auto& l : locations) {
            problem.points.push_back({l.cs_id, {l.latitude, l.longitude}});
        }
        problem.k = cfg.clustering.k;
        problem.size_min = cfg.clustering.size_min;
        problem.size_max = cfg.clustering.size_max;
        const auto sol = cluster::cluster_cs(problem, rng::derive(cfg.seed, "cluster"));
        cluster::write_membership_csv(cfg.out_dir / "membership.csv", problem,
                                      sol.membership);

        models.reserve(static_cast<std::size_t>(problem.k));
        std::vector<std::vector<std::size_t>> stations_of_cluster(
            static_cast<std::size_t>(problem.k));
        for (std::size_t s = 0; s < registry.size(); ++s) {
            stations_of_cluster[static_cast<std::size_t>(sol.membership[s])].push_back(s);
        }
        for (int k = 0; k < problem.k; ++k) {
            std::vector<fed::Shard> shards;
            std::vector<std::string> ids;
            for (std::size_t s : stations_of_cluster[static_cast<std::size_t>(k)]) {
                shards.push_back({registry[s], ingest::take_rows(train, groups[s])});
                ids.push_back(registry[s]);
            }
            const auto r =
                fed::train_dfel(shards, fc, rng::derive(cfg.seed, "train", k));
            fed::write_history_csv(
                cfg.out_dir / ("history_cluster" + std::to_string(k) + ".csv"),
                r.history, ids);
            save_model_json(
                cfg.out_dir / ("model_cluster" + std::to_string(k) + ".json"),
                r.model);
            const auto report = fed::overhead_report(r.ledger);
            fed_bytes += report.federated_bytes;
            cent_bytes += report.centralized_bytes;
            overhead_detail.push_back({{"cluster", k},
                                       {"rounds", r.ledger.rounds},
                                       {"cs_count", r.ledger.cs_count},
                                       {"federated_bytes", report.federated_bytes},
                                       {"centralized_bytes", report.centralized_bytes}});
            models.push_back(r.model);
            for (std::size_t s : stations_of_cluster[static_cast<std::size_t>(k)]) {
                model_of_station[s] = &models.back();
            }
        }
        ordered_json j;
        j["federated_bytes"] = fed_bytes;
        j["centralized_bytes"] = cent_bytes;
        j["reduction_pct"] =
            cent_bytes > 0.0 ? 100.0 * (1.0 - fed_bytes / cent_bytes) : 0.0;
        j["bytes_per_scalar"] = 8;
        j["clusters"] = std::move(overhead_detail);
        std::ofstream out(cfg.out_dir / "overhead.json");
        out << j.dump(2) << '\n';
    }

    // Test RMSE: per-row model chosen by the row's station (identical for the
    // single-model modes).
    double sq = 0.0;
    std::map<const nn::ModelParams*, std::vector<std::size_t>> rows_of_model;
    for (std::size_t r = 0; r < test.size(); ++r) {
        const int s = station_of_row(test, r);
        rows_of_model[model_of_station[static_cast<std::size_t>(s)]].push_back(r);
    }
    for (const auto& [model, rows] : rows_of_model) {
        const auto subset = ingest::take_rows(test, rows);
        const Eigen::VectorXd pred = nn::forward(*model, subset.features);
        sq += (pred - subset.labels).squaredNorm();
    }
    const double test_rmse = std::sqrt(sq / static_cast<double>(test.size()));
    io::write_rmse_json(cfg.out_dir / "rmse.json", test_rmse,
                        mean_predictor_rmse(train, test), mode_name);

    const auto demands =
        predict_demands(model_of_station, train, records, cfg.learning.train_ratio);
    io::write_demands_csv(cfg.out_dir / "demands.csv", registry, demands);

    write_run_meta(cfg, "train");
    result.notes.push_back("test rmse " + csv::format_double(test_rmse));
    return result;
}

CommandResult cmd_market(const config::RunConfig& cfg,
                         const std::filesystem::path& demands_csv) {
    CommandResult result;
    cfg.validate();
    ensure_out_dir(cfg);

    const auto entries = io::read_demands_csv(demands_csv);
    if (entries.empty()) throw std::runtime_error("market: no demands");
    std::vector<std::string> cs_ids;
    std::vector<double> demands;
    for (const auto& [id, d] : entries) {
        cs_ids.push_back(id);
        if (!(d >= 0.0) || !std::isfinite(d)) {
            throw std::runtime_error("market: bad demand for " + id);
        }
        demands.push_back(d);
    }

    const auto model = model_from_config(cfg);
    const auto mcfg = market_config(cfg, demands);
    const auto initial = market::initial_menus(model, mcfg);
    const auto eq = market::iterate_contracts(model, mcfg, initial,
                                              rng::derive(cfg.seed, "market"));

    io::write_equilibrium_json(cfg.out_dir / "equilibrium.json", eq, model, mcfg,
                               cs_ids);
    io::write_welfare_by_type_csv(cfg.out_dir / "welfare_by_type.csv", model,
                                  eq.welfare_by_type);

    const double proposed_welfare =
        market::social_welfare(model.true_type, eq.menus, eq.pi_hat, model, mcfg);
    const auto sym = market::baseline_information_symmetry(
        model, mcfg, rng::derive(cfg.seed, "market"));
    const auto prop = market::baseline_proportional_request(model, mcfg);
    const auto nopred = market::baseline_non_prediction(
        model, mcfg, demands, rng::derive(cfg.seed, "market"));

    csv::Table cmp;
    cmp.header = {"method", "welfare", "total_cs_utility"};
    const double proposed_total = std::accumulate(
        eq.expected_utilities.begin(), eq.expected_utilities.end(), 0.0);
    cmp.rows.push_back({"proposed", csv::format_double(proposed_welfare, 12),
                        csv::format_double(proposed_total, 12)});
    cmp.rows.push_back({"information_symmetry", csv::format_double(sym.welfare, 12),
                        csv::format_double(sym.total_cs_utility, 12)});
    cmp.rows.push_back({"proportional_request", csv::format_double(prop.welfare, 12),
                        csv::format_double(prop.total_cs_utility, 12)});
    cmp.rows.push_back({"non_prediction", csv::format_double(nopred.welfare, 12),
                        csv::format_double(nopred.total_cs_utility, 12)});
    csv::write_file(cfg.out_dir / "comparison.csv", cmp);

    csv::Table cmp_cs;
    cmp_cs.header = {"method", "cs_id", "utility"};
    for (std::size_t i = 0; i < cs_ids.size(); ++i) {
        cmp_cs.rows.push_back({"proposed", cs_ids[i],
                               csv::format_double(eq.expected_utilities[i], 12)});
    }
    for (std::size_t i = 0; i < cs_ids.size(); ++i) {
        cmp_cs.rows.push_back({"information_symmetry", cs_ids[i],
                               csv::format_double(sym.utilities[i], 12)});
    }
    for (std::size_t i = 0; i < cs_ids.size(); ++i) {
        cmp_cs.rows.push_back({"proportional_request", cs_ids[i],
                               csv::format_double(prop.utilities[i], 12)});
    }
    for (std::size_t i = 0; i < cs_ids.size(); ++i) {
        cmp_cs.rows.push_back({"non_prediction", cs_ids[i],
                               csv::format_double(nopred.utilities[i], 12)});
    }
    csv::write_file(cfg.out_dir / "comparison_cs.csv", cmp_cs);

    write_run_meta(cfg, "market");

    std::vector<AuditEntry> audits;
    audits.push_back({"converged", eq.converged, static_cast<double>(eq.rounds)});
    audits.push_back({"feasibility",
                      eq.max_constraint_violation <= mcfg.audit_tol,
                      eq.max_constraint_violation});
    audits.push_back(
        {"ir_residuals", eq.min_ir_residual >= -mcfg.audit_tol, eq.min_ir_residual});
    audits.push_back(
        {"ic_residuals", eq.min_ic_residual >= -mcfg.audit_tol, eq.min_ic_residual});
    audits.push_back({"payment_monotonicity", eq.payments_monotone, 0.0});
    audits.push_back({"welfare_upper_bound",
                      sym.welfare + mcfg.audit_tol >= proposed_welfare,
                      sym.welfare - proposed_welfare});
    finalize_audits(cfg, audits, result);
    result.notes.push_back("rounds " + std::to_string(eq.rounds));
    return result;
}

CommandResult cmd_experiment(const config::RunConfig& cfg,
                             const std::string& name) {
    CommandResult result;
    cfg.validate();
    ensure_out_dir(cfg);

    const auto demands_path = cfg.out_dir / "demands.csv";
    if (!std::filesystem::exists(demands_path)) {
        throw std::runtime_error(
            "experiment: missing upstream artifact demands.csv (run train first)");
    }
    const auto entries = io::read_demands_csv(demands_path);
    std::vector<std::string> cs_ids;
    std::vector<double> demands;
    for (const auto& [id, d] : entries) {
        cs_ids.push_back(id);
        demands.push_back(d);
    }

    const auto model = model_from_config(cfg);
    const auto mcfg = market_config(cfg, demands);
    const auto seed = rng::derive(cfg.seed, "experiment");

    const bool want_type = name == "type-sweep" || name == "figure-suite";
    const bool want_price = name == "price-sweep" || name == "figure-suite";
    if (!want_type && !want_price && name != "figure-suite") {
        throw std::invalid_argument("unknown experiment: " + name);
    }

    if (want_type) {
        const auto rows = market::sweep_types(cfg.experiment.type_sweep,
                                              cfg.market.true_type, model, mcfg, seed);
        io::write_type_sweep_csv(cfg.out_dir / "type_sweep.csv", rows, cs_ids);
    }
    if (want_price) {
        const auto rows =
            market::sweep_price_units(cfg.experiment.price_sweep, model, mcfg, seed);
        io::write_price_sweep_csv(cfg.out_dir / "price_sweep.csv", rows);
        if (name == "figure-suite") {
            csv::Table t;
            t.header = {"price_levels", "phi", "total_cs_utility"};
            for (const auto& row : rows) {
                for (std::size_t k = 0; k < row.cs_total_by_type.size(); ++k) {
                    t.rows.push_back(
                        {std::to_string(row.price_levels),
                         std::to_string(model.phi_min + static_cast<int>(k)),
                         csv::format_double(row.cs_total_by_type[k], 12)});
                }
            }
            csv::write_file(cfg.out_dir / "fig9_price_cs_by_type.csv", t);
        }
    }

    if (name == "figure-suite") {
        // Equilibrium once for the constraint-validity tables.
        const auto eq = market::iterate_contracts(
            model, mcfg, market::initial_menus(model, mcfg),
            rng::derive(cfg.seed, "market"));

        csv::Table ir;
        ir.header = {"phi", "sgp_utility"};
        const auto irres = market::check_ir(eq.menus, eq.pi_hat, model);
        for (std::size_t k = 0; k < irres.size(); ++k) {
            ir.rows.push_back({std::to_string(model.phi_min + static_cast<int>(k)),
                               csv::format_double(irres[k], 12)});
        }
        csv::write_file(cfg.out_dir / "fig4_ir.csv", ir);

        csv::Table icc;
        icc.header = {"true_phi", "bundle_phi", "sgp_utility"};
        for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
            for (int b = model.phi_min; b <= model.phi_max; ++b) {
                const double u =
                    static_cast<double>(phi) *
                        market::sgp_gain(eq.menus, eq.pi_hat, b, model) -
                    market::sgp_cost(eq.menus, eq.pi_hat, b, model);
                icc.rows.push_back({std::to_string(phi), std::to_string(b),
                                    csv::format_double(u, 12)});
            }
        }
        csv::write_file(cfg.out_dir / "fig4_ic.csv", icc);

        // Overhead table from the training artifact when present.
        const auto overhead_path = cfg.out_dir / "overhead.json";
        if (std::filesystem::exists(overhead_path)) {
            std::ifstream in(overhead_path);
            ordered_json j;
            in >> j;
            csv::Table t;
            t.header = {"method", "bytes"};
            t.rows.push_back(
                {"federated",
                 csv::format_double(j.at("federated_bytes").get<double>(), 12)});
            t.rows.push_back(
                {"centralized",
                 csv::format_double(j.at("centralized_bytes").get<double>(), 12)});
            csv::write_file(cfg.out_dir / "fig5_overhead.csv", t);
        }

        // Welfare by type and method.
        csv::Table w;
        w.header = {"phi", "proposed", "information_symmetry",
                    "proportional_request", "non_prediction"};
        for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
            market::SgpTypeModel m_phi = model;
            m_phi.true_type = phi;
            const auto sym = market::baseline_information_symmetry(
                m_phi, mcfg, rng::derive(cfg.seed, "fig6", phi));
            const auto prop = market::baseline_proportional_request(m_phi, mcfg);
            const auto nopred = market::baseline_non_prediction(
                m_phi, mcfg, demands, rng::derive(cfg.seed, "fig6-spot"));
            const auto k = static_cast<std::size_t>(model.index_of(phi));
            w.rows.push_back({std::to_string(phi),
                              csv::format_double(eq.welfare_by_type[k], 12),
                              csv::format_double(sym.welfare, 12),
                              csv::format_double(prop.welfare, 12),
                              csv::format_double(nopred.welfare, 12)});
        }
        csv::write_file(cfg.out_dir / "fig6_welfare_by_type.csv", w);
    }

    write_run_meta(cfg, "experiment");
    return result;
}

}  // namespace evmarket::pipeline
