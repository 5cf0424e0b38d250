#include "evmarket/io.hpp"

#include <fstream>

#include "evmarket/csv.hpp"
#include "json.hpp"

namespace evmarket::io {

using nlohmann::ordered_json;

namespace {

void dump_json(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void write_equilibrium_json(const std::filesystem::path& path,
                            const market::EquilibriumResult& eq,
                            const market::SgpTypeModel& model,
                            const market::MarketConfig& config,
                            const std::vector<std::string>& cs_ids) {
    ordered_json j;
    j["rounds"] = eq.rounds;
    j["converged"] = eq.converged;
    j["kappa"] = config.kappa;
    j["true_type"] = model.true_type;
    j["types"] = {{"phi_min", model.phi_min}, {"phi_max", model.phi_max}};
    j["pi_hat"] = eq.pi_hat.pi;
    auto menus = ordered_json::array();
    for (std::size_t i = 0; i < eq.menus.size(); ++i) {
        ordered_json m;
        m["cs_id"] = cs_ids[i];
        m["payment"] = eq.menus[i].payment;
        m["energy"] = eq.menus[i].energy;
        menus.push_back(std::move(m));
    }
    j["menus"] = std::move(menus);
    j["expected_utilities"] = eq.expected_utilities;
    j["audit"] = {{"max_constraint_violation", eq.max_constraint_violation},
                  {"min_ir_residual", eq.min_ir_residual},
                  {"min_ic_residual", eq.min_ic_residual},
                  {"payments_monotone", eq.payments_monotone},
                  {"audit_tol", config.audit_tol}};
    dump_json(path, j);
}

void write_welfare_by_type_csv(const std::filesystem::path& path,
                               const market::SgpTypeModel& model,
                               const std::vector<double>& welfare_by_type) {
    csv::Table t;
    t.header = {"phi", "welfare"};
    for (std::size_t k = 0; k < welfare_by_type.size(); ++k) {
        t.rows.push_back({std::to_string(model.phi_min + static_cast<int>(k)),
                          csv::format_double(welfare_by_type[k], 12)});
    }
    csv::write_file(path, t);
}

void write_type_sweep_csv(const std::filesystem::path& path,
                          const std::vector<market::TypeSweepRow>& rows,
                          const std::vector<std::string>& cs_ids) {
    csv::Table t;
    t.header = {"phi_tot", "cs_id", "expected_utility"};
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.expected_utilities.size(); ++i) {
            t.rows.push_back({std::to_string(row.phi_tot), cs_ids[i],
                              csv::format_double(row.expected_utilities[i], 12)});
        }
    }
    csv::write_file(path, t);
}

void write_price_sweep_csv(const std::filesystem::path& path,
                           const std::vector<market::PriceSweepRow>& rows) {
    csv::Table t;
    t.header = {"price_levels", "welfare", "total_cs_utility"};
    for (const auto& row : rows) {
        t.rows.push_back({std::to_string(row.price_levels),
                          csv::format_double(row.welfare, 12),
                          csv::format_double(row.total_cs_utility, 12)});
    }
    csv::write_file(path, t);
}

void write_overhead_json(const std::filesystem::path& path,
                         const fed::OverheadReport& report,
                         const fed::OverheadLedger& ledger) {
    ordered_json j;
    j["federated_bytes"] = report.federated_bytes;
    j["centralized_bytes"] = report.centralized_bytes;
    j["reduction_pct"] = report.reduction_pct;
    j["rounds"] = ledger.rounds;
    j["cs_count"] = ledger.cs_count;
    j["model_scalars"] = ledger.model_scalars;
    j["bytes_per_scalar"] = 8;
    j["note"] =
        "byte model: federated = rounds*I*|model|*8, centralized = "
        "sum_i N_i*(F+1)*8; artifact-defined accounting";
    dump_json(path, j);
}

void write_rmse_json(const std::filesystem::path& path, double model_rmse,
                     double mean_predictor_rmse, const std::string& mode) {
    ordered_json j;
    j["mode"] = mode;
    j["test_rmse"] = model_rmse;
    j["mean_predictor_rmse"] = mean_predictor_rmse;
    j["improvement_pct"] =
        mean_predictor_rmse > 0.0
            ? 100.0 * (1.0 - model_rmse / mean_predictor_rmse)
            : 0.0;
    dump_json(path, j);
}

void write_demands_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& cs_ids,
                       const std::vector<double>& predicted_mwh) {
    csv::Table t;
    t.header = {"cs_id", "predicted_mwh"};
    for (std::size_t i = 0; i < cs_ids.size(); ++i) {
        t.rows.push_back({cs_ids[i], csv::format_double(predicted_mwh[i], 12)});
    }
    csv::write_file(path, t);
}

std::vector<std::pair<std::string, double>> read_demands_csv(
    const std::filesystem::path& path) {
    const csv::Table t = csv::read_file(path);
    const int c_id = t.column("cs_id");
    const int c_d = t.column("predicted_mwh");
    if (c_id < 0 || c_d < 0) {
        throw std::runtime_error("demands csv: expected header cs_id,predicted_mwh");
    }
    std::vector<std::pair<std::string, double>> out;
    for (const auto& row : t.rows) {
        out.emplace_back(row[static_cast<std::size_t>(c_id)],
                         std::stod(row[static_cast<std::size_t>(c_d)]));
    }
    return out;
}

}  // namespace evmarket::io
