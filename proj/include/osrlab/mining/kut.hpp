#pragma once

// Known-unknown trainer construction: score an auxiliary set with the trained
// backbone and keep the items the backbone is confidently wrong about.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"
#include "osrlab/nn/backbone.hpp"

namespace osrlab::mining {

/// Shannon entropy in bits, with 0 log 0 taken as 0.
inline double entropy(std::span<const double> p) {
  if (p.empty()) throw InvalidArgument("entropy: empty distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("entropy: negative or non-finite probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("entropy: probabilities sum to " + std::to_string(sum));
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

inline double entropy(const std::vector<double>& p) { return entropy(std::span<const double>(p)); }

struct ScoredItem {
  std::size_t index = 0;  // position in the scored dataset
  double max_prob = 0.0;
  std::size_t argmax = 0;
  double entropy_bits = 0.0;
};

struct ScoredAux {
  data::LabeledDataset source;
  std::vector<ScoredItem> items;
};

/// Rejects `d_x` if it shares a declared class name or an origin tag with any
/// of the protected sets (the KK training data and the UU test fold).
inline void check_disjoint(const data::LabeledDataset& d_x, const std::vector<const data::LabeledDataset*>& protected_sets) {
  std::set<std::string> names(d_x.class_names().begin(), d_x.class_names().end());
  std::set<std::string> origins;
  for (const auto& it : d_x.items()) origins.insert(it.origin);
  for (const auto* other : protected_sets) {
    for (const auto& n : other->class_names()) {
      if (names.count(n)) throw InvalidArgument("score_aux: auxiliary class '" + n + "' overlaps a known or unknown class");
    }
    for (const auto& it : other->items()) {
      if (origins.count(it.origin)) {
        throw InvalidArgument("score_aux: auxiliary origin '" + it.origin + "' overlaps a known or unknown set");
      }
    }
  }
}

/// Max softmax probability and entropy of every item of `d_x`.
inline ScoredAux score_aux(const nn::BackboneNet& net, const data::LabeledDataset& d_x,
                           const std::vector<const data::LabeledDataset*>& protected_sets = {}) {
  check_disjoint(d_x, protected_sets);
  ScoredAux out{d_x, {}};
  if (d_x.empty()) return out;
  const Tensor probs = net.probabilities(d_x.stacked());
  out.items.reserve(d_x.size());
  for (std::size_t i = 0; i < d_x.size(); ++i) {
    const auto row = probs.row(i);
    const auto top = std::max_element(row.begin(), row.end());
    out.items.push_back({i, *top, static_cast<std::size_t>(top - row.begin()), entropy(row)});
  }
  return out;
}

struct KutResult {
  /// Admitted items, all tagged with the single known-unknown class 0.
  data::LabeledDataset kut;
  std::vector<std::size_t> source_index;
  std::optional<double> mean_entropy;  // absent when nothing was admitted
  std::string warning;
};

inline const std::string kKnownUnknownClass = "known_unknown";

/// Keeps exactly the items with max_prob strictly greater than T, in order.
inline KutResult mine_kut(const ScoredAux& scored, double T) {
  if (!(T >= 0.0 && T <= 1.0)) throw InvalidArgument("mine_kut: T must lie in [0, 1]");
  KutResult r{data::LabeledDataset(scored.source.kind(), scored.source.sample_shape(), {kKnownUnknownClass}), {}, {}, {}};
  double h = 0.0;
  for (const auto& it : scored.items) {
    if (it.max_prob > T) {
      const auto& item = scored.source[it.index];
      r.kut.add(item.sample, 0, item.origin);
      r.source_index.push_back(it.index);
      h += it.entropy_bits;
    }
  }
  if (r.kut.empty()) {
    r.warning = "no auxiliary item exceeds T; KUT set is empty";
  } else {
    r.mean_entropy = h / static_cast<double>(r.kut.size());
  }
  return r;
}

}  // namespace osrlab::mining
