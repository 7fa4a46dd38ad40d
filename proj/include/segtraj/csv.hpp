#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace segtraj {

// Shortest round-trippable decimal representation of a double.
std::string format_double(double value);

// Strict numeric parsing; the full field must be consumed.
double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

// Minimal comma-separated table IO. Fields are written verbatim: the panel
// format keeps identifiers free of commas, quotes and newlines.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::vector<std::string> split_csv_line(const std::string& line);

// Numeric matrix IO (no header row).
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

} // namespace segtraj
