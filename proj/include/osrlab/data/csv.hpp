#pragma once

// Vector CSV files: one item per row, `label,v1,...,vd`, constant d. A first
// row whose first field is not a number is treated as a header and skipped.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"

namespace osrlab::data {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

struct CsvRows {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> values;
};

inline CsvRows read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  CsvRows rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = detail::split_fields(line);
    double label_value = 0.0;
    const bool numeric_label = parse_double(fields[0], label_value);
    if (first_content) {
      first_content = false;
      if (!numeric_label) continue;  // header
    }
    if (!numeric_label || label_value < 0 || label_value != static_cast<double>(static_cast<std::size_t>(label_value))) {
      throw FormatError(path + ": row " + std::to_string(line_no) + ": label must be a non-negative integer");
    }
    if (fields.size() < 2) throw FormatError(path + ": row " + std::to_string(line_no) + ": no values");
    if (width == 0) width = fields.size() - 1;
    if (fields.size() - 1 != width) {
      throw FormatError(path + ": row " + std::to_string(line_no) + ": ragged row (" +
                        std::to_string(fields.size() - 1) + " values, expected " + std::to_string(width) + ")");
    }
    std::vector<double> vals(width);
    for (std::size_t k = 0; k < width; ++k) {
      if (!parse_double(fields[k + 1], vals[k]) || !std::isfinite(vals[k])) {
        throw FormatError(path + ": row " + std::to_string(line_no) + ": bad number in column " +
                          std::to_string(k + 2));
      }
    }
    rows.labels.push_back(static_cast<std::size_t>(label_value));
    rows.values.push_back(std::move(vals));
  }
  return rows;
}

/// Loads rows into a dataset of the given sample shape (defaults to [d]).
/// Class names default to "0".."max label".
inline LabeledDataset load_vectors_csv(const std::string& path, std::vector<std::string> class_names = {},
                                       const std::string& origin = "csv", DataKind kind = DataKind::vector,
                                       Shape sample_shape = {}) {
  CsvRows rows = read_csv_rows(path);
  if (sample_shape.empty()) {
    if (rows.values.empty()) throw FormatError(path + ": no data rows and no declared sample shape");
    sample_shape = {rows.values.front().size()};
  }
  if (class_names.empty()) {
    std::size_t max_label = 0;
    for (std::size_t l : rows.labels) max_label = std::max(max_label, l);
    class_names = numeric_class_names(rows.labels.empty() ? 0 : max_label + 1);
  }
  LabeledDataset ds(kind, sample_shape, std::move(class_names));
  for (std::size_t i = 0; i < rows.labels.size(); ++i) {
    if (rows.values[i].size() != shape_size(sample_shape)) {
      throw FormatError(path + ": row width " + std::to_string(rows.values[i].size()) +
                        " does not match sample shape " + shape_string(sample_shape));
    }
    ds.add(Tensor(sample_shape, std::move(rows.values[i])), rows.labels[i], origin);
  }
  return ds;
}

/// Writes items [begin, end) as `label,v1,...` rows with round-trip precision.
inline void write_vectors_csv(const LabeledDataset& ds, const std::string& path, std::size_t begin = 0,
                              std::size_t end = static_cast<std::size_t>(-1)) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  end = std::min(end, ds.size());
  std::string line;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& it = ds[i];
    line = std::to_string(it.class_id);
    for (double v : it.sample.data()) {
      line += ',';
      line += format_double(v);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace osrlab::data
