#pragma once

#include "funmidas/distribution.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace funmidas::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

/// Reads a header line plus rows; every row must have the header's width.
/// Errors carry the 1-based line number.
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

/// Micro-sample file with columns `period,value`; samples grouped by period.
std::map<int, std::vector<double>> read_micro_csv(const std::filesystem::path& path);
void write_micro_csv(std::ostream& os, const std::map<int, std::vector<double>>& samples);

void write_density_csv(std::ostream& os, const dist::DensityOnGrid& d);
dist::DensityOnGrid read_density_csv(std::istream& is);

void write_lqd_csv(std::ostream& os, const dist::LQDCurve& q);
dist::LQDCurve read_lqd_csv(std::istream& is);

/// Matrix with a header row; optional leading label column.
void write_matrix_csv(std::ostream& os, const std::vector<std::string>& header, const Matrix& m,
                      const std::vector<std::string>& row_labels = {}, const std::string& label_name = "");
Matrix read_matrix_csv(std::istream& is, std::vector<std::string>* header = nullptr,
                       std::vector<std::string>* row_labels = nullptr, bool has_labels = false);

enum class SeriesTransform { Level, Diff, PctChange };
SeriesTransform parse_transform(const std::string& s);

/// Quarterly indicator file: `date,series_1,...`. Dates accept YYYYQn,
/// YYYY-Qn or ISO YYYY-MM-DD; rows must be consecutive quarters.
struct IndicatorTable {
  int first_year = 0;
  int first_quarter = 1;
  std::vector<std::string> names;
  Matrix values;  // rows = quarters
};
IndicatorTable read_indicator_csv(const std::filesystem::path& path);
void write_indicator_csv(std::ostream& os, const IndicatorTable& t);

/// Applies per-series transforms; a differenced set drops the first
/// observation of every series so rows stay aligned.
IndicatorTable apply_transforms(const IndicatorTable& t, const std::map<std::string, SeriesTransform>& manifest);

}  // namespace funmidas::io
