// Multi-principal one-agent contract market: SGP/CS utilities, the SGP's
// allocation problem, IR/IC machinery with the transformed constraint system,
// a quadratic-penalty best-response solver, the iterative equilibrium
// algorithm, and welfare accounting.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace evmarket::market {

// The agent's private-type model: integer types phi_min..phi_max with
// distribution probs; capacity(phi) = phi * s_max / phi_max.
struct SgpTypeModel {
    int phi_min = 1;
    int phi_max = 10;
    std::vector<double> probs;  // size type_count(), indexed by phi - phi_min
    double s_max = 500.0;       // MWh
    double zeta = 0.022;        // transfer cost per MWh
    int true_type = 5;

    int type_count() const { return phi_max - phi_min + 1; }
    int index_of(int phi) const { return phi - phi_min; }
    double capacity(int phi) const {
        return static_cast<double>(phi) * s_max / static_cast<double>(phi_max);
    }
    double prob(int phi) const { return probs[static_cast<std::size_t>(index_of(phi))]; }
    void validate() const;

    static SgpTypeModel uniform(int phi_max, double s_max, double zeta,
                                int true_type);
};

struct MarketConfig {
    std::vector<double> rho_unit;  // announced transfer price per CS (MU/MWh)
    std::vector<double> varrho;    // EV charging price per CS (MU/MWh)
    std::vector<double> demands;   // predicted demand per CS (MWh)
    double kappa = 1e-6;           // minimum accepted utility improvement
    int max_rounds = 200;

    // Solver knobs.
    double feasibility_tol = 1e-8;  // inside solvers
    double audit_tol = 1e-6;        // end-to-end audits
    int restarts = 5;               // start point plus perturbations
    double penalty_mu_max = 1e8;
    int max_inner_iterations = 400;

    std::size_t cs_count() const { return demands.size(); }
    void validate() const;

    static MarketConfig defaults(std::vector<double> demands);
};

// Per-CS contract: offered payment and requested energy for every type.
struct ContractMenu {
    std::vector<double> payment;  // MU, indexed by type offset
    std::vector<double> energy;   // MWh
};

using MenuSet = std::vector<ContractMenu>;

struct Allocation {
    std::vector<double> pi;  // transfer proportion per CS, in [0, 1]
};

// --- SGP side -------------------------------------------------------------

// ln(1 + sum_i pi_i * payment_i(phi))
double sgp_gain(const MenuSet& menus, const Allocation& alloc, int phi,
                const SgpTypeModel& model);
// zeta * sum_i pi_i * energy_i(phi)
double sgp_cost(const MenuSet& menus, const Allocation& alloc, int phi,
                const SgpTypeModel& model);
// phi * gain - cost, evaluated at type phi's bundle.
double sgp_utility(int phi, const MenuSet& menus, const Allocation& alloc,
                   const SgpTypeModel& model);

// Maximizes the SGP's utility at type phi over pi in [0,1]^I intersected with
// the capacity halfspace. Closed form for I = 1, projected gradient ascent
// (capacity projection by bisection on the multiplier) otherwise; KKT
// fixed-point residual <= 1e-8.
Allocation solve_p1(const MenuSet& menus, int phi, const SgpTypeModel& model);

// --- CS side ---------------------------------------------------------------

double cs_expected_utility(std::size_t cs, const MenuSet& menus,
                           const Allocation& alloc, const SgpTypeModel& model,
                           const MarketConfig& config);

// IR residual per type: phi*G - C; satisfied when all >= -tol.
std::vector<double> check_ir(const MenuSet& menus, const Allocation& alloc,
                             const SgpTypeModel& model);

// Pairwise IC residuals r(phi, phi_hat); diagonal zero.
Eigen::MatrixXd check_ic(const MenuSet& menus, const Allocation& alloc,
                         const SgpTypeModel& model);

struct ConstraintCounts {
    std::size_t p3_form = 0;  // phi_tot^2 + phi_tot
    std::size_t p5_form = 0;  // 3*phi_tot + 1
};
ConstraintCounts constraint_counts(int phi_tot);

enum class ConstraintKind { capacity, ir, ic_pair, local_ic, monotonicity };

struct ConstraintRef {
    ConstraintKind kind;
    int phi = 0;      // type the constraint is anchored at
    int phi_hat = 0;  // second type for ic_pair
    // local_ic/monotonicity at phi_min reference the empty bundle below the
    // bottom type; they are enumerated for the complexity accounting but are
    // vacuous in the solver, which anchors the bottom type with IR instead.
    bool vacuous = false;
};

std::vector<ConstraintRef> build_p3_constraints(const SgpTypeModel& model);
std::vector<ConstraintRef> build_p5_constraints(const SgpTypeModel& model);

struct MonotonicityCheck {
    bool ok = true;
    int first_violation_phi = 0;  // meaningful when !ok
};
// Payments non-decreasing in type, tolerance -1e-10.
MonotonicityCheck check_monotonicity(const ContractMenu& menu,
                                     const SgpTypeModel& model);

// Max violation of the transformed constraint system (capacity at every type,
// IR at the bottom type, local IC and payment monotonicity above it,
// nonnegativity) at the given state.
double p5_violation(const MenuSet& menus, const Allocation& alloc,
                    const SgpTypeModel& model);

// --- Best response and equilibrium ------------------------------------------

struct BestResponseResult {
    ContractMenu menu;
    double utility = 0.0;          // expected utility of the returned menu
    double max_violation = 0.0;    // transformed-system violation of the result
    bool feasible = false;         // max_violation <= feasibility_tol
    double start_violation = 0.0;  // violation of the start menu in context
};

// Maximizes CS cs's expected utility over its own menu with the other menus
// and the allocation fixed, subject to the transformed constraint system.
// Quadratic-penalty projected gradient with a mu schedule up to 1e8 and
// seeded multi-start; the best feasible point wins.
BestResponseResult best_response(std::size_t cs, const MenuSet& menus,
                                 const Allocation& alloc,
                                 const SgpTypeModel& model,
                                 const MarketConfig& config,
                                 const ContractMenu& start, std::uint64_t seed);

struct AcceptanceEvent {
    int round = 0;
    std::size_t cs = 0;
    double utility_before = 0.0;
    double utility_after = 0.0;
    // Accepted to restore feasibility after the re-solved allocation moved the
    // common constraints, rather than through the kappa improvement rule.
    bool restoration = false;
};

struct EquilibriumResult {
    MenuSet menus;
    Allocation pi_hat;
    std::vector<double> expected_utilities;
    int rounds = 0;
    bool converged = false;
    double max_constraint_violation = 0.0;
    double min_ir_residual = 0.0;
    double min_ic_residual = 0.0;
    bool payments_monotone = true;
    std::vector<double> welfare_by_type;
    std::vector<AcceptanceEvent> acceptances;
};

// Round-based best-response iteration: re-solve the allocation at the true
// type, then update CSs in ascending index order, accepting a new menu only
// when it improves that CS's expected utility by more than kappa. Terminates
// on a round with no acceptance or at max_rounds.
EquilibriumResult iterate_contracts(const SgpTypeModel& model,
                                    const MarketConfig& config,
                                    const MenuSet& initial,
                                    std::uint64_t seed);

// SGP utility at phi plus the realized CS utilities at phi's bundle.
double social_welfare(int phi, const MenuSet& menus, const Allocation& alloc,
                      const SgpTypeModel& model, const MarketConfig& config);

// Demand-linked starting menus: energy_i(phi) = D_i * phi / phi_max,
// payment_i(phi) = rho_unit_i * energy_i(phi).
MenuSet initial_menus(const SgpTypeModel& model, const MarketConfig& config);

}  // namespace evmarket::market
