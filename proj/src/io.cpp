#include "funmidas/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace funmidas::io {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  if (b < e && s[b] == '+') ++b;
  double v = 0.0;
  auto res = std::from_chars(s.data() + b, s.data() + e, v);
  if (res.ec != std::errc() || res.ptr != s.data() + e) throw DataError("not a number: '" + s + "'");
  return v;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

}  // namespace

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw DataError("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw DataError("CSV input is empty");
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

// Parses a numeric cell, reporting the CSV line on failure.
double cell_number(const std::string& cell, std::size_t row_index) {
  try {
    return parse_double(cell);
  } catch (const DataError&) {
    throw DataError("CSV line " + std::to_string(row_index + 2) + ": not a number: '" + cell + "'");
  }
}

void require_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected) throw DataError("unexpected CSV header '" + join(t.header) + "'; expected '" + join(expected) + "'");
}

}  // namespace

std::map<int, std::vector<double>> read_micro_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv_file(path);
  require_header(t, {"period", "value"});
  std::map<int, std::vector<double>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double p = cell_number(t.rows[r][0], r);
    if (p != std::floor(p)) throw DataError("CSV line " + std::to_string(r + 2) + ": period must be an integer");
    const double v = cell_number(t.rows[r][1], r);
    if (!std::isfinite(v)) throw DataError("CSV line " + std::to_string(r + 2) + ": non-finite value");
    out[static_cast<int>(p)].push_back(v);
  }
  return out;
}

void write_micro_csv(std::ostream& os, const std::map<int, std::vector<double>>& samples) {
  os << "period,value\n";
  for (const auto& [period, values] : samples)
    for (double v : values) os << period << ',' << format_double(v) << '\n';
}

void write_density_csv(std::ostream& os, const dist::DensityOnGrid& d) {
  os << "grid_point,value\n";
  for (int i = 0; i < d.grid.n_points; ++i)
    os << format_double(d.grid.point(i)) << ',' << format_double(d.values[i]) << '\n';
}

dist::DensityOnGrid read_density_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  require_header(t, {"grid_point", "value"});
  const int n = static_cast<int>(t.rows.size());
  if (n < 3) throw DataError("density CSV needs at least 3 rows");
  dist::DensityOnGrid d;
  d.grid = dist::SupportGrid(cell_number(t.rows.front()[0], 0), cell_number(t.rows.back()[0], n - 1), n);
  d.values.resize(n);
  for (int i = 0; i < n; ++i) d.values[i] = cell_number(t.rows[i][1], i);
  return d;
}

void write_lqd_csv(std::ostream& os, const dist::LQDCurve& q) {
  os << "grid_point,value\n";
  for (int i = 0; i < q.tau.n_tau; ++i) os << format_double(q.tau.at(i)) << ',' << format_double(q.values[i]) << '\n';
}

dist::LQDCurve read_lqd_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  require_header(t, {"grid_point", "value"});
  const int n = static_cast<int>(t.rows.size());
  if (n < 3) throw DataError("LQD CSV needs at least 3 rows");
  dist::LQDCurve q;
  q.tau = dist::TauGrid(cell_number(t.rows.front()[0], 0), n);
  q.values.resize(n);
  for (int i = 0; i < n; ++i) q.values[i] = cell_number(t.rows[i][1], i);
  return q;
}

void write_matrix_csv(std::ostream& os, const std::vector<std::string>& header, const Matrix& m,
                      const std::vector<std::string>& row_labels, const std::string& label_name) {
  const bool labels = !row_labels.empty();
  if (labels) os << label_name << (header.empty() ? "" : ",");
  os << join(header) << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (labels) os << row_labels[r] << (m.cols() ? "," : "");
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << format_double(m(r, c));
    os << '\n';
  }
}

Matrix read_matrix_csv(std::istream& is, std::vector<std::string>* header, std::vector<std::string>* row_labels,
                       bool has_labels) {
  const CsvTable t = read_csv(is);
  const int offset = has_labels ? 1 : 0;
  const auto cols = static_cast<Eigen::Index>(t.header.size()) - offset;
  Matrix m(static_cast<Eigen::Index>(t.rows.size()), cols);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (row_labels && has_labels) row_labels->push_back(t.rows[r][0]);
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = cell_number(t.rows[r][c + offset], r);
  }
  if (header) header->assign(t.header.begin() + offset, t.header.end());
  return m;
}

SeriesTransform parse_transform(const std::string& s) {
  if (s == "level") return SeriesTransform::Level;
  if (s == "diff" || s == "delta") return SeriesTransform::Diff;
  if (s == "pct" || s == "pct_change" || s == "growth") return SeriesTransform::PctChange;
  throw ConfigError("unknown series transform '" + s + "' (expected level, diff or pct)");
}

namespace {

std::pair<int, int> parse_quarter(const std::string& s, std::size_t row) {
  auto fail = [&]() -> std::pair<int, int> {
    throw DataError("CSV line " + std::to_string(row + 2) + ": unrecognised date '" + s + "'");
  };
  if (s.size() < 6) return fail();
  int year = 0;
  auto r = std::from_chars(s.data(), s.data() + 4, year);
  if (r.ec != std::errc()) return fail();
  std::string rest = s.substr(4);
  if (!rest.empty() && rest[0] == '-') rest = rest.substr(1);
  if (rest.size() == 2 && (rest[0] == 'Q' || rest[0] == 'q') && rest[1] >= '1' && rest[1] <= '4')
    return {year, rest[1] - '0'};
  int month = 0;
  auto r2 = std::from_chars(rest.data(), rest.data() + std::min<std::size_t>(2, rest.size()), month);
  if (r2.ec != std::errc() || month < 1 || month > 12) return fail();
  return {year, (month - 1) / 3 + 1};
}

}  // namespace

IndicatorTable read_indicator_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv_file(path);
  if (t.header.size() < 2 || t.header[0] != "date")
    throw DataError(path.string() + ": expected header 'date,series_1,...,series_n'");
  IndicatorTable out;
  out.names.assign(t.header.begin() + 1, t.header.end());
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(out.names.size()));
  int prev = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto [y, q] = parse_quarter(t.rows[r][0], r);
    const int idx = 4 * y + (q - 1);
    if (r == 0) {
      out.first_year = y;
      out.first_quarter = q;
    } else if (idx != prev + 1) {
      throw DataError(path.string() + ": CSV line " + std::to_string(r + 2) + ": quarters are not consecutive");
    }
    prev = idx;
    for (std::size_t c = 0; c < out.names.size(); ++c) {
      const double v = cell_number(t.rows[r][c + 1], r);
      if (!std::isfinite(v)) throw DataError(path.string() + ": CSV line " + std::to_string(r + 2) + ": missing value");
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

void write_indicator_csv(std::ostream& os, const IndicatorTable& t) {
  os << "date";
  for (const auto& n : t.names) os << ',' << n;
  os << '\n';
  int idx = 4 * t.first_year + (t.first_quarter - 1);
  for (Eigen::Index r = 0; r < t.values.rows(); ++r, ++idx) {
    os << idx / 4 << "Q" << idx % 4 + 1;
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) os << ',' << format_double(t.values(r, c));
    os << '\n';
  }
}

IndicatorTable apply_transforms(const IndicatorTable& t, const std::map<std::string, SeriesTransform>& manifest) {
  bool differenced = false;
  std::vector<SeriesTransform> kinds;
  for (const auto& name : t.names) {
    auto it = manifest.find(name);
    const SeriesTransform k = it == manifest.end() ? SeriesTransform::Level : it->second;
    differenced = differenced || k != SeriesTransform::Level;
    kinds.push_back(k);
  }
  if (!differenced) return t;
  if (t.values.rows() < 2) throw DataError("indicator table too short to difference");
  IndicatorTable out = t;
  const Eigen::Index n = t.values.rows() - 1;
  out.values.resize(n, t.values.cols());
  for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const double prev = t.values(r, c);
      const double cur = t.values(r + 1, c);
      switch (kinds[c]) {
        case SeriesTransform::Level: out.values(r, c) = cur; break;
        case SeriesTransform::Diff: out.values(r, c) = cur - prev; break;
        case SeriesTransform::PctChange:
          if (prev == 0.0) throw DataError("percent change of series '" + t.names[c] + "' divides by zero");
          out.values(r, c) = 100.0 * (cur - prev) / prev;
          break;
      }
    }
  }
  int idx = 4 * t.first_year + t.first_quarter;  // next quarter
  out.first_year = idx / 4;
  out.first_quarter = idx % 4 + 1;
  return out;
}

}  // namespace funmidas::io
