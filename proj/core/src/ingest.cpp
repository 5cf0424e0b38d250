#include "evmarket/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "evmarket/csv.hpp"
#include "evmarket/rng.hpp"

namespace evmarket::ingest {

bool valid_date(int year, int month, int day) {
    if (year < 1 || month < 1 || month > 12 || day < 1) return false;
    static const int dim[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int days = dim[month - 1];
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    if (month == 2 && leap) days = 29;
    return day <= days;
}

long Date::days_from_epoch() const {
    // Howard Hinnant's days_from_civil.
    int y = year;
    const int m = month;
    const int d = day;
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

int Date::day_of_week() const {
    // 1970-01-01 was a Thursday; shift so Monday = 0.
    long d = days_from_epoch();
    return static_cast<int>(((d % 7) + 7 + 3) % 7);
}

Date Date::next_day() const {
    Date d = *this;
    d.day += 1;
    if (!valid_date(d.year, d.month, d.day)) {
        d.day = 1;
        d.month += 1;
        if (d.month > 12) {
            d.month = 1;
            d.year += 1;
        }
    }
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

namespace {

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool parse_iso_date(const std::string& s, Date& out) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    int y, m, d;
    if (!parse_int(std::string_view(s).substr(0, 4), y)) return false;
    if (!parse_int(std::string_view(s).substr(5, 2), m)) return false;
    if (!parse_int(std::string_view(s).substr(8, 2), d)) return false;
    if (!valid_date(y, m, d)) return false;
    out = Date{y, m, d};
    return true;
}

// HH:MM, optionally HH:MM:SS (seconds discarded).
bool parse_time(const std::string& s, int& minute_of_day) {
    if (s.size() != 5 && s.size() != 8) return false;
    if (s[2] != ':') return false;
    if (s.size() == 8 && s[5] != ':') return false;
    int h, m;
    if (!parse_int(std::string_view(s).substr(0, 2), h)) return false;
    if (!parse_int(std::string_view(s).substr(3, 2), m)) return false;
    if (h < 0 || h > 23 || m < 0 || m > 59) return false;
    if (s.size() == 8) {
        int sec;
        if (!parse_int(std::string_view(s).substr(6, 2), sec)) return false;
        if (sec < 0 || sec > 59) return false;
    }
    minute_of_day = h * 60 + m;
    return true;
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

int require_column(const csv::Table& t, const std::string& name) {
    const int idx = t.column(name);
    if (idx < 0) throw ParseError("missing required column: " + name);
    return idx;
}

}  // namespace

std::vector<TransactionRecord> parse_transactions(
    const std::filesystem::path& path, const std::vector<std::string>& registry,
    const ColumnMap& columns) {
    if (!std::filesystem::exists(path)) {
        throw ParseError("transactions file not found: " + path.string());
    }
    const csv::Table t = csv::read_file(path);
    const int c_cs = require_column(t, columns.cs_id);
    const int c_tx = require_column(t, columns.tx_id);
    const int c_date = require_column(t, columns.date);
    const int c_time = require_column(t, columns.time);
    const int c_energy = require_column(t, columns.energy_kwh);

    std::unordered_map<std::string, std::size_t> station_index;
    for (std::size_t i = 0; i < registry.size(); ++i) station_index[registry[i]] = i;

    std::vector<TransactionRecord> records;
    records.reserve(t.rows.size());
    long row_no = 0;
    for (const auto& row : t.rows) {
        ++row_no;
        const auto fail = [&](const std::string& what) {
            throw ParseError("row " + std::to_string(row_no) + ": " + what, row_no);
        };
        const int max_col = std::max({c_cs, c_tx, c_date, c_time, c_energy});
        if (static_cast<int>(row.size()) <= max_col) fail("too few fields");

        TransactionRecord rec;
        rec.cs_id = row[c_cs];
        if (!station_index.count(rec.cs_id)) fail("unknown cs_id '" + rec.cs_id + "'");
        rec.tx_id = row[c_tx];
        if (!parse_iso_date(row[c_date], rec.date)) fail("bad date '" + row[c_date] + "'");
        if (!parse_time(row[c_time], rec.minute_of_day)) fail("bad time '" + row[c_time] + "'");
        if (!parse_real(row[c_energy], rec.energy_kwh)) fail("bad energy '" + row[c_energy] + "'");
        if (rec.energy_kwh < 0.0) fail("negative energy " + row[c_energy]);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<StationLocation> parse_locations(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ParseError("locations file not found: " + path.string());
    }
    const csv::Table t = csv::read_file(path);
    const int c_cs = require_column(t, "cs_id");
    const int c_lat = require_column(t, "latitude");
    const int c_lon = require_column(t, "longitude");

    std::vector<StationLocation> out;
    long row_no = 0;
    for (const auto& row : t.rows) {
        ++row_no;
        const auto fail = [&](const std::string& what) {
            throw ParseError("row " + std::to_string(row_no) + ": " + what, row_no);
        };
        StationLocation loc;
        loc.cs_id = row[c_cs];
        if (!parse_real(row[c_lat], loc.latitude) || loc.latitude < -90.0 ||
            loc.latitude > 90.0) {
            fail("bad latitude");
        }
        if (!parse_real(row[c_lon], loc.longitude) || loc.longitude < -180.0 ||
            loc.longitude > 180.0) {
            fail("bad longitude");
        }
        out.push_back(std::move(loc));
    }
    return out;
}

EncodedDataset encode(const std::vector<TransactionRecord>& records,
                      const std::vector<std::string>& registry) {
    std::unordered_map<std::string, std::size_t> station_index;
    for (std::size_t i = 0; i < registry.size(); ++i) station_index[registry[i]] = i;

    EncodedDataset ds;
    ds.layout.station_count = registry.size();
    const auto n = static_cast<Eigen::Index>(records.size());
    const auto width = static_cast<Eigen::Index>(ds.layout.width());
    ds.features = Eigen::MatrixXd::Zero(n, width);
    ds.labels = Eigen::VectorXd::Zero(n);

    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& rec = records[static_cast<std::size_t>(r)];
        const auto it = station_index.find(rec.cs_id);
        if (it == station_index.end()) {
            throw ParseError("encode: cs_id not in registry: " + rec.cs_id);
        }
        ds.features(r, static_cast<Eigen::Index>(it->second)) = 1.0;
        ds.features(r, static_cast<Eigen::Index>(ds.layout.dow_offset() +
                                                 rec.date.day_of_week())) = 1.0;
        ds.features(r, static_cast<Eigen::Index>(ds.layout.hour_offset() +
                                                 rec.hour())) = 1.0;
        ds.labels(r) = rec.energy_kwh;
    }
    return ds;
}

EncodedDataset take_rows(const EncodedDataset& dataset,
                         const std::vector<std::size_t>& indices) {
    EncodedDataset out;
    out.layout = dataset.layout;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), dataset.features.cols());
    out.labels.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            dataset.features.row(static_cast<Eigen::Index>(indices[i]));
        out.labels(static_cast<Eigen::Index>(i)) =
            dataset.labels(static_cast<Eigen::Index>(indices[i]));
    }
    return out;
}

std::pair<EncodedDataset, EncodedDataset> split(const EncodedDataset& dataset,
                                                double ratio,
                                                std::uint64_t seed) {
    if (dataset.size() == 0) throw std::invalid_argument("split: empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw std::invalid_argument("split: ratio must lie in (0, 1)");
    }
    const std::size_t n = dataset.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng::Engine eng(rng::derive(seed, "split"));
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(eng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(perm[i - 1], perm[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test_idx(perm.begin() + static_cast<long>(n_train), perm.end());
    return {take_rows(dataset, train_idx), take_rows(dataset, test_idx)};
}

SynthData synth_generate(const SynthParams& params) {
    if (params.n_stations < 1) throw std::invalid_argument("synth: n_stations must be >= 1");
    if (params.n_tx < 1) throw std::invalid_argument("synth: n_tx must be >= 1");

    SynthData out;
    rng::Engine eng(rng::derive(params.seed, "synth"));

    std::vector<double> base(params.n_stations), amp(params.n_stations),
        weekend(params.n_stations);
    for (int s = 0; s < params.n_stations; ++s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "CS%02d", s + 1);
        out.registry.emplace_back(buf);
        base[s] = eng.uniform(3.0, 9.0);
        amp[s] = eng.uniform(2.0, 6.0);
        weekend[s] = eng.uniform(0.0, 1.5);

        StationLocation loc;
        loc.cs_id = out.registry.back();
        loc.latitude = eng.uniform(params.lat_min, params.lat_max);
        loc.longitude = eng.uniform(params.lon_min, params.lon_max);
        out.locations.push_back(loc);
    }

    // Commute-shaped hourly demand profile, peaks near 08:30 and 18:00.
    const auto profile = [](int hour) {
        const double h = hour;
        return std::exp(-(h - 8.5) * (h - 8.5) / 6.0) +
               0.9 * std::exp(-(h - 18.0) * (h - 18.0) / 10.0);
    };

    out.records.reserve(static_cast<std::size_t>(params.n_tx));
    for (int n = 0; n < params.n_tx; ++n) {
        const int s = n % params.n_stations;
        TransactionRecord rec;
        rec.cs_id = out.registry[static_cast<std::size_t>(s)];
        char buf[24];
        std::snprintf(buf, sizeof(buf), "T%06d", n);
        rec.tx_id = buf;

        const int day_offset = static_cast<int>(eng.uniform_int(0, 364));
        Date d{2017, 1, 1};
        for (int k = 0; k < day_offset; ++k) d = d.next_day();
        rec.date = d;
        rec.minute_of_day = static_cast<int>(eng.uniform_int(0, 24 * 60 - 1));

        const bool is_weekend = d.day_of_week() >= 5;
        double e = base[s] + amp[s] * profile(rec.hour()) +
                   (is_weekend ? weekend[s] : 0.0) + eng.normal();
        rec.energy_kwh = std::max(0.05, e);
        out.records.push_back(std::move(rec));
    }
    return out;
}

void write_transactions_csv(const std::filesystem::path& path,
                            const std::vector<TransactionRecord>& records) {
    csv::Table t;
    t.header = {"cs_id", "tx_id", "date", "time", "energy_kwh"};
    t.rows.reserve(records.size());
    for (const auto& r : records) {
        char time_buf[32];
        std::snprintf(time_buf, sizeof(time_buf), "%02d:%02d", r.minute_of_day / 60,
                      r.minute_of_day % 60);
        char energy_buf[32];
        std::snprintf(energy_buf, sizeof(energy_buf), "%.3f", r.energy_kwh);
        t.rows.push_back({r.cs_id, r.tx_id, r.date.to_string(), time_buf, energy_buf});
    }
    csv::write_file(path, t);
}

void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<StationLocation>& locations) {
    csv::Table t;
    t.header = {"cs_id", "latitude", "longitude"};
    for (const auto& l : locations) {
        char lat[32], lon[32];
        std::snprintf(lat, sizeof(lat), "%.6f", l.latitude);
        std::snprintf(lon, sizeof(lon), "%.6f", l.longitude);
        t.rows.push_back({l.cs_id, lat, lon});
    }
    csv::write_file(path, t);
}

}  // namespace evmarket::ingest
