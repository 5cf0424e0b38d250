#include "evmarket/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace evmarket::config {

using nlohmann::ordered_json;

void RunConfig::validate() const {
    if (synth.n_stations < 1) throw std::invalid_argument("config: n_stations >= 1");
    if (synth.n_tx < 1) throw std::invalid_argument("config: n_tx >= 1");
    if (!(learning.train_ratio > 0.0 && learning.train_ratio < 1.0)) {
        throw std::invalid_argument("config: train_ratio in (0,1)");
    }
    if (learning.dropout_rate < 0.0 || learning.dropout_rate >= 1.0) {
        throw std::invalid_argument("config: dropout_rate in [0,1)");
    }
    if (learning.epochs_max < 1) throw std::invalid_argument("config: epochs_max >= 1");
    for (int h : learning.hidden_layers) {
        if (h < 1) throw std::invalid_argument("config: hidden layer size >= 1");
    }
    if (clustering.k < 1) throw std::invalid_argument("config: k >= 1");
    if (market.phi_max < 1) throw std::invalid_argument("config: phi_max >= 1");
    if (market.true_type < 1 || market.true_type > market.phi_max) {
        throw std::invalid_argument("config: true_type in [1, phi_max]");
    }
    if (market.rho_unit <= 0.0 || market.varrho <= 0.0 || market.kappa <= 0.0) {
        throw std::invalid_argument("config: market prices and kappa must be positive");
    }
    if (market.s_max < 0.0) throw std::invalid_argument("config: s_max >= 0");
    if (market.max_rounds < 1) throw std::invalid_argument("config: max_rounds >= 1");
}

namespace {

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path.string());
    ordered_json j;
    in >> j;

    RunConfig c;
    maybe(j, "seed", c.seed);
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        std::string s;
        if (p.contains("transactions")) c.transactions = p.at("transactions").get<std::string>();
        if (p.contains("locations")) c.locations = p.at("locations").get<std::string>();
        if (p.contains("out_dir")) c.out_dir = p.at("out_dir").get<std::string>();
        (void)s;
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        maybe(s, "n_stations", c.synth.n_stations);
        maybe(s, "n_tx", c.synth.n_tx);
        if (s.contains("lat_range")) {
            c.synth.lat_min = s.at("lat_range").at(0).get<double>();
            c.synth.lat_max = s.at("lat_range").at(1).get<double>();
        }
        if (s.contains("lon_range")) {
            c.synth.lon_min = s.at("lon_range").at(0).get<double>();
            c.synth.lon_max = s.at("lon_range").at(1).get<double>();
        }
    }
    if (j.contains("learning")) {
        const auto& l = j.at("learning");
        maybe(l, "hidden_layers", c.learning.hidden_layers);
        maybe(l, "dropout_rate", c.learning.dropout_rate);
        maybe(l, "learning_rate", c.learning.learning_rate);
        maybe(l, "beta1", c.learning.beta1);
        maybe(l, "beta2", c.learning.beta2);
        maybe(l, "epsilon", c.learning.epsilon);
        maybe(l, "epochs_max", c.learning.epochs_max);
        maybe(l, "convergence_window", c.learning.convergence_window);
        maybe(l, "convergence_tol", c.learning.convergence_tol);
        maybe(l, "train_ratio", c.learning.train_ratio);
    }
    if (j.contains("clustering")) {
        const auto& k = j.at("clustering");
        maybe(k, "k", c.clustering.k);
        maybe(k, "size_min", c.clustering.size_min);
        maybe(k, "size_max", c.clustering.size_max);
    }
    if (j.contains("market")) {
        const auto& m = j.at("market");
        maybe(m, "phi_max", c.market.phi_max);
        maybe(m, "true_type", c.market.true_type);
        maybe(m, "s_max", c.market.s_max);
        maybe(m, "zeta", c.market.zeta);
        maybe(m, "rho_unit", c.market.rho_unit);
        maybe(m, "varrho", c.market.varrho);
        maybe(m, "kappa", c.market.kappa);
        maybe(m, "max_rounds", c.market.max_rounds);
    }
    if (j.contains("experiment")) {
        const auto& e = j.at("experiment");
        maybe(e, "type_sweep", c.experiment.type_sweep);
        maybe(e, "price_sweep", c.experiment.price_sweep);
    }
    c.validate();

    // Relative paths resolve against the config file's directory.
    const auto base = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");
    const auto resolve = [&](std::filesystem::path& p) {
        if (p.is_relative()) p = base / p;
    };
    resolve(c.transactions);
    resolve(c.locations);
    resolve(c.out_dir);
    return c;
}

void save(const std::filesystem::path& path, const RunConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    j["paths"] = {{"transactions", c.transactions.string()},
                  {"locations", c.locations.string()},
                  {"out_dir", c.out_dir.string()}};
    j["synth"] = {{"n_stations", c.synth.n_stations},
                  {"n_tx", c.synth.n_tx},
                  {"lat_range", {c.synth.lat_min, c.synth.lat_max}},
                  {"lon_range", {c.synth.lon_min, c.synth.lon_max}}};
    j["learning"] = {{"hidden_layers", c.learning.hidden_layers},
                     {"dropout_rate", c.learning.dropout_rate},
                     {"learning_rate", c.learning.learning_rate},
                     {"beta1", c.learning.beta1},
                     {"beta2", c.learning.beta2},
                     {"epsilon", c.learning.epsilon},
                     {"epochs_max", c.learning.epochs_max},
                     {"convergence_window", c.learning.convergence_window},
                     {"convergence_tol", c.learning.convergence_tol},
                     {"train_ratio", c.learning.train_ratio}};
    j["clustering"] = {{"k", c.clustering.k},
                       {"size_min", c.clustering.size_min},
                       {"size_max", c.clustering.size_max}};
    j["market"] = {{"phi_max", c.market.phi_max},
                   {"true_type", c.market.true_type},
                   {"s_max", c.market.s_max},
                   {"zeta", c.market.zeta},
                   {"rho_unit", c.market.rho_unit},
                   {"varrho", c.market.varrho},
                   {"kappa", c.market.kappa},
                   {"max_rounds", c.market.max_rounds}};
    j["experiment"] = {{"type_sweep", c.experiment.type_sweep},
                       {"price_sweep", c.experiment.price_sweep}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace evmarket::config
