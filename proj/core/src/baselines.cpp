#include "evmarket/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evmarket/rng.hpp"

namespace evmarket::market {

namespace {

SgpTypeModel restrict_to_true_type(const SgpTypeModel& model) {
    SgpTypeModel m = model;
    m.phi_min = model.true_type;
    m.phi_max = model.true_type;
    m.probs = {1.0};
    // capacity(phi) must still evaluate to the true type's capacity:
    // phi * s_max / phi_max with phi = phi_max = true_type needs s_max scaled.
    m.s_max = model.capacity(model.true_type);
    m.true_type = model.true_type;
    return m;
}

}  // namespace

BaselineResult baseline_information_symmetry(const SgpTypeModel& model,
                                             const MarketConfig& config,
                                             std::uint64_t seed) {
    // With the type known, the per-CS program keeps capacity and the single
    // IR constraint at the true type; that is exactly the proposed program on
    // the one-type restriction of the model.
    const SgpTypeModel restricted = restrict_to_true_type(model);
    const MenuSet start = initial_menus(restricted, config);
    const EquilibriumResult eq =
        iterate_contracts(restricted, config, start, rng::derive(seed, "infosym"));

    BaselineResult r;
    r.utilities = eq.expected_utilities;
    r.welfare = social_welfare(restricted.true_type, eq.menus, eq.pi_hat,
                               restricted, config);
    r.total_cs_utility =
        std::accumulate(r.utilities.begin(), r.utilities.end(), 0.0);
    return r;
}

BaselineResult baseline_proportional_request(const SgpTypeModel& model,
                                             const MarketConfig& config) {
    const std::size_t n = config.cs_count();
    const double total_demand =
        std::accumulate(config.demands.begin(), config.demands.end(), 0.0);
    const double cap = model.capacity(model.true_type);
    const double share =
        total_demand > 0.0 ? std::min(1.0, cap / total_demand) : 1.0;

    BaselineResult r;
    r.utilities.resize(n);
    Allocation alloc;
    alloc.pi.assign(n, share);
    MenuSet menus(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.utilities[i] = share * (config.varrho[i] - config.rho_unit[i]) *
                         config.demands[i];
        // Single-column menus at the true type for the welfare formula.
        menus[i].payment = {config.rho_unit[i] * config.demands[i]};
        menus[i].energy = {config.demands[i]};
    }
    const SgpTypeModel restricted = restrict_to_true_type(model);
    r.welfare = social_welfare(restricted.true_type, menus, alloc, restricted, config);
    r.total_cs_utility =
        std::accumulate(r.utilities.begin(), r.utilities.end(), 0.0);
    return r;
}

BaselineResult baseline_non_prediction(const SgpTypeModel& model,
                                       const MarketConfig& config,
                                       const std::vector<double>& actual_demands,
                                       std::uint64_t seed) {
    const std::size_t n = config.cs_count();
    if (actual_demands.size() != n) {
        throw std::invalid_argument("non-prediction baseline: demand size mismatch");
    }
    const double total_demand =
        std::accumulate(actual_demands.begin(), actual_demands.end(), 0.0);
    const double cap = model.capacity(model.true_type);
    const double share =
        total_demand > 0.0 ? std::min(1.0, cap / total_demand) : 1.0;

    rng::Engine eng(rng::derive(seed, "spot"));
    BaselineResult r;
    r.utilities.resize(n);
    Allocation alloc;
    alloc.pi.assign(n, share);
    MenuSet menus(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double spot = config.rho_unit[i] * eng.uniform(1.0, 1.2);
        r.utilities[i] = share * (config.varrho[i] - spot) * actual_demands[i];
        menus[i].payment = {spot * actual_demands[i]};
        menus[i].energy = {actual_demands[i]};
    }
    const SgpTypeModel restricted = restrict_to_true_type(model);
    r.welfare = social_welfare(restricted.true_type, menus, alloc, restricted, config);
    r.total_cs_utility =
        std::accumulate(r.utilities.begin(), r.utilities.end(), 0.0);
    return r;
}

std::vector<TypeSweepRow> sweep_types(const std::vector<int>& phi_tots,
                                      int true_type, const SgpTypeModel& base,
                                      const MarketConfig& config,
                                      std::uint64_t seed) {
    std::vector<TypeSweepRow> rows;
    for (int phi_tot : phi_tots) {
        if (phi_tot < 1) throw std::invalid_argument("sweep_types: phi_tot >= 1");
        const int clamped_true = std::min(true_type, phi_tot);
        const SgpTypeModel model =
            SgpTypeModel::uniform(phi_tot, base.s_max, base.zeta, clamped_true);
        const MenuSet start = initial_menus(model, config);
        const EquilibriumResult eq = iterate_contracts(
            model, config, start, rng::derive(seed, "type-sweep", phi_tot));

        TypeSweepRow row;
        row.phi_tot = phi_tot;
        row.true_type = clamped_true;
        row.expected_utilities = eq.expected_utilities;
        row.converged = eq.converged;
        row.feasible = eq.max_constraint_violation <= config.audit_tol &&
                       eq.min_ir_residual >= -config.audit_tol &&
                       eq.min_ic_residual >= -config.audit_tol;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> assign_price_levels(int count, double base_price,
                                        const std::vector<double>& demands) {
    if (count < 1) throw std::invalid_argument("price levels: count >= 1");
    const std::size_t n = demands.size();
    std::vector<double> levels(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        levels[static_cast<std::size_t>(j)] =
            count == 1 ? base_price
                       : 0.95 * base_price + 0.05 * base_price *
                                                 static_cast<double>(j) /
                                                 static_cast<double>(count - 1);
    }
    // Rank CSs by demand, highest first; ties keep the lower index first.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return demands[a] > demands[b];
    });
    std::vector<double> out(n, base_price);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t level_idx =
            n > 1 ? static_cast<std::size_t>(std::llround(
                        static_cast<double>(rank) * static_cast<double>(count - 1) /
                        static_cast<double>(n - 1)))
                  : 0;
        out[order[rank]] = levels[level_idx];
    }
    return out;
}

std::vector<PriceSweepRow> sweep_price_units(const std::vector<int>& counts,
                                             const SgpTypeModel& model,
                                             const MarketConfig& config,
                                             std::uint64_t seed) {
    std::vector<PriceSweepRow> rows;
    for (int count : counts) {
        MarketConfig cfg = config;
        // The announced base price is per-CS already; use CS 0's as the base
        // of the negotiated band.
        cfg.rho_unit = assign_price_levels(count, config.rho_unit[0], config.demands);
        const MenuSet start = initial_menus(model, cfg);
        const EquilibriumResult eq = iterate_contracts(
            model, cfg, start, rng::derive(seed, "price-sweep", count));

        PriceSweepRow row;
        row.price_levels = count;
        row.welfare = social_welfare(model.true_type, eq.menus, eq.pi_hat, model, cfg);
        row.total_cs_utility =
            std::accumulate(eq.expected_utilities.begin(),
                            eq.expected_utilities.end(), 0.0);
        row.welfare_by_type = eq.welfare_by_type;
        for (int phi = model.phi_min; phi <= model.phi_max; ++phi) {
            const auto t = static_cast<std::size_t>(model.index_of(phi));
            double s = 0.0;
            for (std::size_t i = 0; i < eq.menus.size(); ++i) {
                s += eq.pi_hat.pi[i] * (cfg.varrho[i] * eq.menus[i].energy[t] -
                                        eq.menus[i].payment[t]);
            }
            row.cs_total_by_type.push_back(s);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace evmarket::market
