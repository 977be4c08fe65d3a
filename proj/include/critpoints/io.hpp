#pragma once

// CSV exchange: header `re,im` optionally followed by `residual` or `weight`,
// numbers written with 17 significant digits so they round-trip exactly.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "critpoints/errors.hpp"
#include "critpoints/metrics.hpp"
#include "critpoints/polyroots.hpp"
#include "critpoints/precision.hpp"

namespace critpoints {

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct PointTable {
  std::vector<cplx> points;
  /// Name of the optional third column, empty when absent.
  std::string extra_name;
  std::vector<double> extra;
};

inline void write_points_csv(std::ostream& os, std::span<const cplx> pts) {
  os << "re,im\n";
  for (const cplx& p : pts) os << format_double(p.real()) << ',' << format_double(p.imag()) << '\n';
}

inline void write_critical_points_csv(std::ostream& os, const CriticalPointSet& cps) {
  os << "re,im,residual\n";
  for (std::size_t i = 0; i < cps.size(); ++i)
    os << format_double(cps.points[i].real()) << ',' << format_double(cps.points[i].imag()) << ','
       << format_double(cps.residuals[i]) << '\n';
}

inline void write_measure_csv(std::ostream& os, const DiscreteMeasure& m) {
  os << "re,im,weight\n";
  for (const auto& a : m.atoms())
    os << format_double(a.location.real()) << ',' << format_double(a.location.imag()) << ','
       << format_double(a.weight) << '\n';
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw ConfigError("csv line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace detail

inline PointTable read_points_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  PointTable t;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "re" || header[1] != "im" || header.size() > 3)
      throw ConfigError("csv: header must be re,im[,residual|,weight]");
    if (header.size() == 3) {
      if (header[2] != "residual" && header[2] != "weight")
        throw ConfigError("csv: third column must be residual or weight");
      t.extra_name = header[2];
    }
    break;
  }
  if (line_no == 0) throw ConfigError("csv: empty input");
  const std::size_t cols = t.extra_name.empty() ? 2 : 3;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != cols)
      throw ConfigError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(cols) + " columns");
    t.points.emplace_back(detail::parse_cell(cells[0], line_no),
                          detail::parse_cell(cells[1], line_no));
    if (cols == 3) t.extra.push_back(detail::parse_cell(cells[2], line_no));
  }
  return t;
}

inline PointTable read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_points_csv(in);
}

/// Weighted measure when the table has a weight column, empirical otherwise.
inline DiscreteMeasure to_measure(const PointTable& t) {
  if (t.extra_name != "weight") return DiscreteMeasure::empirical(t.points);
  std::vector<WeightedAtom> atoms;
  for (std::size_t i = 0; i < t.points.size(); ++i) atoms.push_back({t.points[i], t.extra[i]});
  return DiscreteMeasure(std::move(atoms));
}

}  // namespace critpoints
