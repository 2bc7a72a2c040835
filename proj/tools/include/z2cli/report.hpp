#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "z2spectra/rigidity.hpp"

namespace z2cli {

using json = nlohmann::json;

/// "%.17g"; enough digits to round-trip any double.
std::string format17(double x);

json to_json(const z2s::Configuration& p);
json to_json(const Eigen::VectorXcd& v);  // [[re, im], ...]
json to_json(const std::vector<double>& v);
json to_json(const z2s::RigidityReport& r);

/// Pretty-printed with sorted keys and a trailing newline. Doubles use the
/// shortest representation that reads back to the same bits.
void write_json(const std::filesystem::path& path, const json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<double> values);
};

/// UTF-8, comma-delimited, header row, numbers with 17 significant digits.
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Fixed-width table of the expansion data: point, Re a, Im a, Re b, Im b, residual.
std::string trace_table(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const std::vector<double>& residual);

/// growth.csv (probe, step, growth, slope) and angles.csv (index, angle).
void emit_plotdata(const z2s::RigidityReport& r, const std::filesystem::path& dir);

}  // namespace z2cli
