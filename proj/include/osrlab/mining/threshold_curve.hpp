#pragma once

// Least-squares cubic through (T, AUROC) samples and selection of the T that
// maximizes it on the sampled range.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "osrlab/error.hpp"

namespace osrlab::mining {

struct CurvePoint {
  double t = 0.0;
  double auroc = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// F(T) = a + b T + c T^2 + d T^3.
struct ThresholdCurve {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  std::vector<CurvePoint> points;  // sorted by T
  double t_star = 0.0;
  bool interior = false;  // t_star is a critical point rather than an endpoint

  double operator()(double t) const { return a + t * (b + t * (c + t * d)); }
  double second_derivative(double t) const { return 2.0 * c + 6.0 * d * t; }
};

namespace detail {

// Solves the 4x4 system in place by Gaussian elimination with partial
// pivoting. Throws if a pivot vanishes relative to the matrix scale.
inline std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> m, std::array<double, 4> r) {
  double scale = 0.0;
  for (const auto& row : m)
    for (double v : row) scale = std::max(scale, std::abs(v));
  for (std::size_t col = 0; col < 4; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < 4; ++i)
      if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
    if (!(std::abs(m[piv][col]) > 1e-12 * scale)) throw InvalidArgument("fit_threshold_curve: rank-deficient system");
    std::swap(m[piv], m[col]);
    std::swap(r[piv], r[col]);
    for (std::size_t i = col + 1; i < 4; ++i) {
      const double f = m[i][col] / m[col][col];
      for (std::size_t j = col; j < 4; ++j) m[i][j] -= f * m[col][j];
      r[i] -= f * r[col];
    }
  }
  std::array<double, 4> x{};
  for (std::size_t i = 4; i-- > 0;) {
    double s = r[i];
    for (std::size_t j = i + 1; j < 4; ++j) s -= m[i][j] * x[j];
    x[i] = s / m[i][i];
  }
  return x;
}

}  // namespace detail

inline ThresholdCurve fit_threshold_curve(std::vector<CurvePoint> points) {
  if (points.size() < 4) throw InvalidArgument("fit_threshold_curve: need at least 4 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.t) || !std::isfinite(p.auroc)) throw InvalidArgument("fit_threshold_curve: non-finite point");
  }
  // Sorting first makes the normal-equation sums, and hence t_star,
  // independent of the input order.
  std::sort(points.begin(), points.end(), [](const CurvePoint& x, const CurvePoint& y) {
    return x.t != y.t ? x.t < y.t : x.auroc < y.auroc;
  });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].t == points[i - 1].t) {
      throw InvalidArgument("fit_threshold_curve: rank-deficient system (duplicate T " + std::to_string(points[i].t) + ")");
    }
  }

  // Rescale T to u in [-1, 1] for conditioning: T = center + half * u.
  const double half = 0.5 * (points.back().t - points.front().t);
  const double center = points.front().t + half;
  std::array<std::array<double, 4>, 4> m{};
  std::array<double, 4> r{};
  for (const auto& p : points) {
    const double u = (p.t - center) / half;
    const std::array<double, 4> v{1.0, u, u * u, u * u * u};
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) m[i][j] += v[i] * v[j];
      r[i] += v[i] * p.auroc;
    }
  }
  const auto g = detail::solve4(m, r);  // coefficients in u

  // Expand sum_k g_k ((T - center) / half)^k into powers of T.
  ThresholdCurve curve;
  curve.points = points;
  const double s1 = 1.0 / half, s2 = s1 * s1, s3 = s2 * s1;
  curve.d = g[3] * s3;
  curve.c = g[2] * s2 - 3.0 * g[3] * s3 * center;
  curve.b = g[1] * s1 - 2.0 * g[2] * s2 * center + 3.0 * g[3] * s3 * center * center;
  curve.a = g[0] - g[1] * s1 * center + g[2] * s2 * center * center - g[3] * s3 * center * center * center;

  // Candidates: both endpoints plus interior roots of F'(u) = g1 + 2 g2 u + 3 g3 u^2
  // where F''(u) = 2 g2 + 6 g3 u < 0.
  auto fu = [&](double u) { return g[0] + u * (g[1] + u * (g[2] + u * g[3])); };
  std::vector<std::pair<double, bool>> candidates{{-1.0, false}, {1.0, false}};
  auto consider = [&](double u) {
    if (u > -1.0 && u < 1.0 && 2.0 * g[2] + 6.0 * g[3] * u < 0.0) candidates.push_back({u, true});
  };
  const double qa = 3.0 * g[3], qb = 2.0 * g[2], qc = g[1];
  if (std::abs(qa) <= 1e-14 * (std::abs(qb) + std::abs(qc))) {
    if (qb != 0.0) consider(-qc / qb);
  } else {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      // Numerically stable pair of roots.
      const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
      if (q != 0.0) consider(qc / q);
      consider(q / qa);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  double best_u = candidates.front().first;
  bool best_interior = candidates.front().second;
  for (const auto& [u, interior] : candidates) {
    if (fu(u) > fu(best_u)) {
      best_u = u;
      best_interior = interior;
    }
  }
  curve.t_star = best_interior ? center + half * best_u : (best_u < 0.0 ? points.front().t : points.back().t);
  curve.interior = best_interior;
  return curve;
}

}  // namespace osrlab::mining
