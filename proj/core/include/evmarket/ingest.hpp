// Charging-transaction ingestion: CSV parsing against a station registry,
// one-hot feature encoding (station, day-of-week, hour-of-day), seeded
// train/test splitting, and a synthetic desk-scale data generator.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evmarket::ingest {

// Raised for malformed input files; carries the 1-based data row number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string msg, long row = -1)
        : std::runtime_error(std::move(msg)), row_(row) {}
    long row() const { return row_; }

private:
    long row_;
};

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    // Days since 1970-01-01 (proleptic Gregorian).
    long days_from_epoch() const;
    // 0 = Monday .. 6 = Sunday.
    int day_of_week() const;
    Date next_day() const;

    auto operator<=>(const Date&) const = default;
    std::string to_string() const;  // ISO YYYY-MM-DD
};

bool valid_date(int year, int month, int day);

struct TransactionRecord {
    std::string cs_id;
    std::string tx_id;
    Date date;
    int minute_of_day = 0;  // minute resolution; only the hour enters the model
    double energy_kwh = 0.0;

    int hour() const { return minute_of_day / 60; }
};

struct StationLocation {
    std::string cs_id;
    double latitude = 0.0;
    double longitude = 0.0;
};

// One-hot block layout: [stations | day-of-week (7) | hour-of-day (24)].
struct FeatureLayout {
    std::size_t station_count = 0;

    std::size_t width() const { return station_count + 7 + 24; }
    std::size_t station_offset() const { return 0; }
    std::size_t dow_offset() const { return station_count; }
    std::size_t hour_offset() const { return station_count + 7; }
};

struct EncodedDataset {
    Eigen::MatrixXd features;  // N x F, rows are transactions
    Eigen::VectorXd labels;    // N, energy in kWh
    FeatureLayout layout;

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

// Maps canonical column names onto the actual header of the input file, so
// the Dundee open-data export can be read without rewriting it.
struct ColumnMap {
    std::string cs_id = "cs_id";
    std::string tx_id = "tx_id";
    std::string date = "date";
    std::string time = "time";
    std::string energy_kwh = "energy_kwh";
};

std::vector<TransactionRecord> parse_transactions(
    const std::filesystem::path& path, const std::vector<std::string>& registry,
    const ColumnMap& columns = {});

std::vector<StationLocation> parse_locations(const std::filesystem::path& path);

EncodedDataset encode(const std::vector<TransactionRecord>& records,
                      const std::vector<std::string>& registry);

// Seeded shuffle split; |train| = floor(ratio * N), ratio in (0, 1).
std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& dataset,
                                                double ratio,
                                                std::uint64_t seed);

// Row subset by index, preserving order.
EncodedDataset take_rows(const EncodedDataset& dataset,
                         const std::vector<std::size_t>& indices);

struct SynthParams {
    std::uint64_t seed = 0;
    int n_stations = 6;
    int n_tx = 600;
    double lat_min = 56.44;
    double lat_max = 56.50;
    double lon_min = -3.08;
    double lon_max = -2.92;
};

struct SynthData {
    std::vector<std::string> registry;
    std::vector<TransactionRecord> records;
    std::vector<StationLocation> locations;
};

// Reproducible synthetic transactions whose mean energy varies by station and
// hour of day, so the demand model has structure to learn.
SynthData synth_generate(const SynthParams& params);

void write_transactions_csv(const std::filesystem::path& path,
                            const std::vector<TransactionRecord>& records);
void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<StationLocation>& locations);

}  // namespace evmarket::ingest
