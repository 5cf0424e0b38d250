// Artifact-grade output writers: equilibrium JSON, welfare and sweep CSVs,
// overhead and RMSE JSON records. All headers documented in the README.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "evmarket/baselines.hpp"
#include "evmarket/federated.hpp"
#include "evmarket/market.hpp"

namespace evmarket::io {

void write_equilibrium_json(const std::filesystem::path& path,
                            const market::EquilibriumResult& eq,
                            const market::SgpTypeModel& model,
                            const market::MarketConfig& config,
                            const std::vector<std::string>& cs_ids);

void write_welfare_by_type_csv(const std::filesystem::path& path,
                               const market::SgpTypeModel& model,
                               const std::vector<double>& welfare_by_type);

void write_type_sweep_csv(const std::filesystem::path& path,
                          const std::vector<market::TypeSweepRow>& rows,
                          const std::vector<std::string>& cs_ids);

void write_price_sweep_csv(const std::filesystem::path& path,
                           const std::vector<market::PriceSweepRow>& rows);

void write_overhead_json(const std::filesystem::path& path,
                         const fed::OverheadReport& report,
                         const fed::OverheadLedger& ledger);

void write_rmse_json(const std::filesystem::path& path, double model_rmse,
                     double mean_predictor_rmse,
                     const std::string& mode);

void write_demands_csv(const std::filesystem::path& path,
                       const std::vector<std::string>& cs_ids,
                       const std::vector<double>& predicted_mwh);

std::vector<std::pair<std::string, double>> read_demands_csv(
    const std::filesystem::path& path);

}  // namespace evmarket::io
