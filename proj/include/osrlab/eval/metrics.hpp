#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "osrlab/error.hpp"

namespace osrlab::eval {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // items scoring >= threshold are called positive
  std::uint64_t fp = 0;
  std::uint64_t tp = 0;
};

/// Staircase ROC sorted by descending threshold, from (0,0) at +inf to (1,1)
/// at the lowest score. Tied scores collapse into a single point.
struct RocCurve {
  std::vector<RocPoint> points;
  double auroc = 0.0;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

/// Labels are 1 (positive) or 0 (negative). AUROC by the trapezoidal rule,
/// evaluated in integer counts, so it equals the pairwise statistic
/// P(s+ > s-) + P(s+ = s-) / 2 exactly.
inline RocCurve roc_auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("roc_auroc: scores and labels differ in length");
  RocCurve roc;
  for (int l : labels) {
    if (l == 1) {
      ++roc.positives;
    } else if (l == 0) {
      ++roc.negatives;
    } else {
      throw InvalidArgument("roc_auroc: labels must be 0 or 1");
    }
  }
  if (roc.positives == 0 || roc.negatives == 0) throw InvalidArgument("roc_auroc: both labels must be present");
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidArgument("roc_auroc: NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto P = static_cast<double>(roc.positives);
  const auto N = static_cast<double>(roc.negatives);
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});
  std::uint64_t tp = 0, fp = 0;
  // Twice the area, in units of 1 / (P N).
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp) += 1;
    area2 += (fp - fp0) * (tp + tp0);
    roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, s, fp, tp});
  }
  roc.auroc = static_cast<double>(area2) / (2.0 * P * N);
  return roc;
}

inline RocCurve roc_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  return roc_auroc(std::span<const double>(scores), std::span<const int>(labels));
}

/// Fraction of positions where prediction equals label.
template <typename T>
double accuracy(std::span<const T> predictions, std::span<const T> labels) {
  if (predictions.size() != labels.size()) throw InvalidArgument("accuracy: length mismatch");
  if (predictions.empty()) throw InvalidArgument("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

template <typename T>
double accuracy(const std::vector<T>& predictions, const std::vector<T>& labels) {
  return accuracy(std::span<const T>(predictions), std::span<const T>(labels));
}

}  // namespace osrlab::eval
