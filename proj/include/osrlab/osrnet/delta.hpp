#pragma once

// Optimal operating point on an ROC curve and the confidence cut-off derived
// from it. "Positive" here means known unknown (S high).

#include <cmath>
#include <limits>
#include <string>

#include "osrlab/error.hpp"
#include "osrlab/eval/metrics.hpp"

namespace osrlab::osrnet {

/// Misclassification costs. c_pn is C(P|N), the cost of calling a negative
/// positive; c_np is C(N|P); c_nn and c_pp are the costs of correct calls.
struct Costs {
  double c_pn = 0.5;
  double c_np = 0.5;
  double c_nn = 0.0;
  double c_pp = 0.0;
};

/// S_op = (C(P|N) - C(N|N)) / (C(N|P) - C(P|P)) * N / P.
inline double optimal_slope(const Costs& c, double positives, double negatives) {
  const double den = c.c_np - c.c_pp;
  if (den == 0.0) throw InvalidArgument("optimal_slope: C(N|P) - C(P|P) must be nonzero");
  if (!(positives > 0.0) || !(negatives > 0.0)) throw InvalidArgument("optimal_slope: class counts must be positive");
  return (c.c_pn - c.c_nn) / den * (negatives / positives);
}

/// Objective values closer than this count as tied.
inline constexpr double kTieTolerance = 1e-12;

struct DeltaResult {
  double delta = 0.5;
  double slope = 1.0;
  eval::RocPoint point;
  std::string warning;
};

/// Picks the ROC point maximizing TPR - S_op FPR (ties toward lower FPR) and
/// places delta midway between that point's threshold and the next lower
/// score, so that S >= delta reproduces the point's decisions.
inline DeltaResult estimate_delta(const eval::RocCurve& roc, const Costs& costs, double positives, double negatives) {
  if (roc.points.empty()) throw InvalidArgument("estimate_delta: empty ROC curve");
  DeltaResult r;
  r.slope = optimal_slope(costs, positives, negatives);
  if (roc.points.size() == 1) {
    r.point = roc.points.front();
    r.delta = r.point.threshold;
    r.warning = "degenerate ROC with a single point";
    return r;
  }
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    const auto& p = roc.points[i];
    const double v = p.tpr - r.slope * p.fpr;
    // Points come in increasing FPR, so requiring a strict gain keeps the
    // lowest FPR on ties. The tolerance absorbs rounding in tpr - slope * fpr.
    if (v > best_value + kTieTolerance) {
      best_value = v;
      best = i;
    }
  }
  r.point = roc.points[best];
  if (best == 0) {
    // Nothing is called positive: place delta above the top score.
    const double top = roc.points[1].threshold;
    r.delta = top < 1.0 ? 0.5 * (top + 1.0) : std::nextafter(top, std::numeric_limits<double>::infinity());
  } else if (best + 1 == roc.points.size()) {
    // Everything is called positive.
    const double low = r.point.threshold;
    r.delta = low > 0.0 ? 0.5 * low : low;
  } else {
    r.delta = 0.5 * (r.point.threshold + roc.points[best + 1].threshold);
  }
  return r;
}

inline DeltaResult estimate_delta(const eval::RocCurve& roc, const Costs& costs = {}) {
  return estimate_delta(roc, costs, static_cast<double>(roc.positives), static_cast<double>(roc.negatives));
}

}  // namespace osrlab::osrnet
