#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::eval {

struct Kernel {
  enum class Kind { linear, rbf } kind = Kind::rbf;
  /// RBF only; unset means the median pairwise distance of the pooled sample.
  std::optional<double> bandwidth;

  static Kernel linear() { return {Kind::linear, std::nullopt}; }
  static Kernel rbf(std::optional<double> bandwidth = std::nullopt) { return {Kind::rbf, bandwidth}; }
};

inline std::string to_string(const Kernel& k) { return k.kind == Kernel::Kind::linear ? "linear" : "rbf"; }

struct MmdResult {
  double distance = 0.0;
  Kernel kernel;
  double bandwidth = 0.0;  // the bandwidth actually used (rbf)
  std::string warning;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace detail

/// Median Euclidean distance over all unordered pairs of the pooled rows.
inline double median_pairwise_distance(const Tensor& x, const Tensor& y) {
  std::vector<std::span<const double>> rows;
  for (std::size_t i = 0; i < x.dim(0); ++i) rows.push_back(x.row(i));
  for (std::size_t i = 0; i < y.dim(0); ++i) rows.push_back(y.row(i));
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(std::sqrt(detail::squared_distance(rows[i], rows[j])));
  }
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double upper = d[mid];
  if (d.size() % 2 == 1) return upper;
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Biased (V-statistic) maximum mean discrepancy between the row sets of x
/// and y: sqrt(max(0, mean k(x,x') + mean k(y,y') - 2 mean k(x,y))).
/// RBF kernel: k(a,b) = exp(-|a-b|^2 / (2 bandwidth^2)).
inline MmdResult mmd(const Tensor& x, const Tensor& y, Kernel kernel = Kernel::rbf()) {
  if (x.rank() != 2 || y.rank() != 2) throw ShapeError("mmd: expects [n x d] feature matrices");
  if (x.dim(0) == 0 || y.dim(0) == 0) throw InvalidArgument("mmd: both samples must be nonempty");
  if (x.dim(1) != y.dim(1)) throw ShapeError("mmd: feature dimensions differ");

  MmdResult result;
  result.kernel = kernel;
  double gamma = 0.0;
  if (kernel.kind == Kernel::Kind::rbf) {
    double bw = kernel.bandwidth ? *kernel.bandwidth : median_pairwise_distance(x, y);
    if (!(bw > 0.0)) {
      result.warning = "zero median bandwidth; falling back to 1";
      bw = 1.0;
    }
    result.bandwidth = bw;
    gamma = 1.0 / (2.0 * bw * bw);
  }
  auto k = [&](std::span<const double> a, std::span<const double> b) {
    return kernel.kind == Kernel::Kind::linear ? detail::dot(a, b) : std::exp(-gamma * detail::squared_distance(a, b));
  };
  // All three sums run in the same loop order, so identical samples cancel
  // exactly instead of leaving rounding residue that the square root would
  // magnify.
  auto sum = [&](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(0); ++i) {
      for (std::size_t j = 0; j < b.dim(0); ++j) s += k(a.row(i), b.row(j));
    }
    return s;
  };
  const auto n1 = static_cast<double>(x.dim(0));
  const auto n2 = static_cast<double>(y.dim(0));
  const double sq = sum(x, x) / (n1 * n1) + sum(y, y) / (n2 * n2) - 2.0 * sum(x, y) / (n1 * n2);
  result.distance = std::sqrt(std::max(0.0, sq));
  return result;
}

}  // namespace osrlab::eval
