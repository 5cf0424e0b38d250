// Minimal CSV reading/writing. Comma-separated, UTF-8, header row required,
// no quoting (none of the formats emitted or consumed here need it).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evmarket::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name; -1 when absent.
    int column(const std::string& name) const;
};

Table read_file(const std::filesystem::path& path);
Table parse(const std::string& text);

void write_file(const std::filesystem::path& path, const Table& table);

// Fixed-format double for byte-stable CSV output.
std::string format_double(double v, int precision = 9);

}  // namespace evmarket::csv
