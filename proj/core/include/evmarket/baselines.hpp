// Comparator economic models (information symmetry, proportional request,
// non-prediction spot pricing) and the experiment sweeps over type counts and
// negotiated price-unit counts.
#pragma once

#include <cstdint>
#include <vector>

#include "evmarket/market.hpp"

namespace evmarket::market {

struct BaselineResult {
    std::vector<double> utilities;  // per CS
    double welfare = 0.0;           // at the SGP's true type
    double total_cs_utility = 0.0;
};

// Upper-bound comparator: the type is known, so each CS maximizes its actual
// utility at the true type only, under capacity and the single IR constraint
// there. Coincides with the proposed program when only one type exists, so it
// is run as the same iteration on the model restricted to the true type.
BaselineResult baseline_information_symmetry(const SgpTypeModel& model,
                                             const MarketConfig& config,
                                             std::uint64_t seed);

// No contracts: pi_i = min(1, S(true type)/sum_j D_j) for everyone,
// payment_i = rho_unit_i * D_i, utility_i = pi_i*(varrho_i - rho_unit_i)*D_i.
BaselineResult baseline_proportional_request(const SgpTypeModel& model,
                                             const MarketConfig& config);

// No prediction: actual demands are requested at a seeded per-CS spot price
// drawn uniformly from [rho_unit, 1.2*rho_unit]; same proportional rule.
BaselineResult baseline_non_prediction(const SgpTypeModel& model,
                                       const MarketConfig& config,
                                       const std::vector<double>& actual_demands,
                                       std::uint64_t seed);

struct TypeSweepRow {
    int phi_tot = 0;
    int true_type = 0;
    std::vector<double> expected_utilities;
    bool converged = false;
    bool feasible = false;  // audits within tolerance
};

// Rebuilds the type set per phi_tot (uniform distribution, same s_max) and
// reruns the equilibrium; the true type is clamped into the rebuilt range.
std::vector<TypeSweepRow> sweep_types(const std::vector<int>& phi_tots,
                                      int true_type, const SgpTypeModel& base,
                                      const MarketConfig& config,
                                      std::uint64_t seed);

struct PriceSweepRow {
    int price_levels = 0;
    double welfare = 0.0;
    double total_cs_utility = 0.0;
    std::vector<double> welfare_by_type;
    std::vector<double> cs_total_by_type;  // realized CS utility sum per type
};

// P price levels evenly spaced on [0.95*base, base] (the single base price
// when P = 1); CSs ranked by predicted demand, highest demand -> lowest
// price; the equilibrium is re-run per P.
std::vector<PriceSweepRow> sweep_price_units(const std::vector<int>& counts,
                                             const SgpTypeModel& model,
                                             const MarketConfig& config,
                                             std::uint64_t seed);

// Assignment of per-CS price units used by sweep_price_units; exposed for
// tests. Returns one price per CS.
std::vector<double> assign_price_levels(int count, double base_price,
                                        const std::vector<double>& demands);

}  // namespace evmarket::market
