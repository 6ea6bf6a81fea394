#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "osrlab/error.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::nn {

/// Clamp applied to probabilities before taking logarithms.
inline constexpr double kLogEpsilon = 1e-12;

/// Row-wise numerically stable softmax of a [B x K] tensor.
inline Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

/// Element-wise logistic function, clamped to [eps, 1 - eps] so the output
/// stays strictly inside (0, 1).
inline Tensor sigmoid(const Tensor& logits) {
  Tensor out = logits;
  for (double& v : out.data()) {
    const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    v = std::clamp(s, kLogEpsilon, 1.0 - kLogEpsilon);
  }
  return out;
}

/// Multi-class cross-entropy summed over the batch (not averaged):
/// L = -sum_i sum_j t_ij ln(y_ij).
inline double multiclass_ce_loss(const Tensor& probs, const Tensor& targets) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    throw ShapeError("multiclass_ce_loss: probs " + shape_string(probs.shape()) + " vs targets " +
                     shape_string(targets.shape()));
  }
  double loss = 0.0;
  for (std::size_t r = 0; r < probs.dim(0); ++r) {
    auto p = probs.row(r);
    auto t = targets.row(r);
    int ones = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (t[j] == 1.0) {
        ++ones;
      } else if (t[j] != 0.0) {
        throw InvalidArgument("multiclass_ce_loss: target row " + std::to_string(r) + " is not one-hot");
      }
      if (t[j] != 0.0) loss -= t[j] * std::log(std::clamp(p[j], kLogEpsilon, 1.0));
    }
    if (ones != 1) {
      throw InvalidArgument("multiclass_ce_loss: target row " + std::to_string(r) + " is not one-hot");
    }
  }
  return loss;
}

/// Binary cross-entropy, both terms, averaged over the batch.
inline double binary_ce_loss(const Tensor& outputs, const Tensor& targets) {
  if (outputs.shape() != targets.shape() || outputs.rank() != 2 || outputs.dim(1) != 1) {
    throw ShapeError("binary_ce_loss: expects matching [B x 1] tensors, got " +
                     shape_string(outputs.shape()) + " and " + shape_string(targets.shape()));
  }
  const std::size_t b = outputs.dim(0);
  if (b == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double y = std::clamp(outputs[i], kLogEpsilon, 1.0 - kLogEpsilon);
    const double t = targets[i];
    if (t != 0.0 && t != 1.0) throw InvalidArgument("binary_ce_loss: targets must be 0 or 1");
    loss -= t * std::log(y) + (1.0 - t) * std::log(1.0 - y);
  }
  return loss / static_cast<double>(b);
}

/// [B x K] one-hot encoding of class ids.
template <typename Range>
Tensor one_hot(const Range& labels, std::size_t classes) {
  Tensor t({static_cast<std::size_t>(std::size(labels)), classes});
  std::size_t r = 0;
  for (auto label : labels) {
    const auto c = static_cast<std::size_t>(label);
    if (c >= classes) throw InvalidArgument("one_hot: label " + std::to_string(c) + " out of range");
    t.at(r++, c) = 1.0;
  }
  return t;
}

}  // namespace osrlab::nn
