#pragma once

#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "metrics.hpp"

namespace incvar {
namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& field, std::size_t line_no,
                           std::size_t col) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error("line " + std::to_string(line_no) + ", column " +
                             std::to_string(col + 1) + ": cannot parse number from '" +
                             field + "'");
  return v;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

/// Dataset CSV: header x_1,...,x_p,y[,weight]; one row per point, numbers at
/// 17 significant digits so files round-trip exactly.
inline void write_dataset_csv(const DataSet& data, std::ostream& os) {
  const std::size_t p = data.dim();
  for (std::size_t d = 0; d < p; ++d) os << "x_" << (d + 1) << ',';
  os << "y,weight\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t d = 0; d < p; ++d) os << format_g17(data.xs[i][d]) << ',';
    os << format_g17(data.ys[i]) << ',' << format_g17(data.weights[i]) << '\n';
  }
}

inline DataSet read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dataset CSV: empty file");
  const auto header = detail::split_csv_line(detail::strip_cr(line));
  std::size_t p = 0;
  while (p < header.size() && header[p] == "x_" + std::to_string(p + 1)) ++p;
  if (p == 0 || p >= header.size() || header[p] != "y")
    throw std::runtime_error(
        "dataset CSV: header must be x_1,...,x_p,y with an optional trailing weight");
  bool has_weight = false;
  if (header.size() == p + 2) {
    if (header[p + 1] != "weight")
      throw std::runtime_error("dataset CSV: unexpected trailing column '" +
                               header[p + 1] + "'");
    has_weight = true;
  } else if (header.size() != p + 1) {
    throw std::runtime_error("dataset CSV: unexpected extra columns after y");
  }

  std::vector<Vec> xs;
  Vec ys, weights;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("dataset CSV: line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()));
    Vec x(p);
    for (std::size_t d = 0; d < p; ++d) x[d] = detail::parse_double(fields[d], line_no, d);
    xs.push_back(std::move(x));
    ys.push_back(detail::parse_double(fields[p], line_no, p));
    if (has_weight)
      weights.push_back(detail::parse_double(fields[p + 1], line_no, p + 1));
  }
  if (has_weight) return DataSet::weighted(std::move(xs), std::move(ys), std::move(weights));
  return DataSet::uniform(std::move(xs), std::move(ys));
}

/// Point-cloud CSV: header c_1,...,c_d; one point per row.
inline void write_cloud_csv(const EmpiricalCloud& cloud, std::ostream& os) {
  cloud.validate();
  const std::size_t d = cloud.dim();
  for (std::size_t k = 0; k < d; ++k) os << "c_" << (k + 1) << (k + 1 < d ? ',' : '\n');
  for (const auto& pt : cloud.points) {
    for (std::size_t k = 0; k < d; ++k)
      os << format_g17(pt[k]) << (k + 1 < d ? ',' : '\n');
  }
}

inline EmpiricalCloud read_cloud_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("cloud CSV: empty file");
  const auto header = detail::split_csv_line(detail::strip_cr(line));
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] != "c_" + std::to_string(k + 1))
      throw std::runtime_error("cloud CSV: header must be c_1,...,c_d");
  const std::size_t d = header.size();
  EmpiricalCloud cloud;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = detail::strip_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != d)
      throw std::runtime_error("cloud CSV: line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(d));
    Vec pt(d);
    for (std::size_t k = 0; k < d; ++k)
      pt[k] = detail::parse_double(fields[k], line_no, k);
    cloud.points.push_back(std::move(pt));
  }
  cloud.validate();
  return cloud;
}

inline void write_dataset_csv(const DataSet& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset_csv(data, os);
  if (!os) throw std::runtime_error("write failed for " + path);
}

inline DataSet read_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_dataset_csv(is);
}

inline void write_cloud_csv(const EmpiricalCloud& cloud, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_cloud_csv(cloud, os);
  if (!os) throw std::runtime_error("write failed for " + path);
}

inline EmpiricalCloud read_cloud_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_cloud_csv(is);
}

}  // namespace incvar
