#pragma once

// FC1 feature banks and the confidence subnetwork (CS) trained on them.
// Label orientation: 0 = known known, 1 = known unknown, so S near 1 means
// "probably unknown".

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"
#include "osrlab/eval/metrics.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/nn/optim.hpp"
#include "osrlab/random.hpp"

namespace osrlab::osrnet {

struct FeatureBank {
  Tensor features;  // [M x d1]
  Tensor labels;    // [M x 1], 0 or 1

  std::size_t size() const { return features.empty() ? 0 : features.dim(0); }
  std::size_t width() const { return features.rank() == 2 ? features.dim(1) : 0; }
  std::size_t count(int label) const {
    return static_cast<std::size_t>(std::count(labels.data().begin(), labels.data().end(), double(label)));
  }
  std::vector<int> int_labels() const {
    std::vector<int> out;
    out.reserve(size());
    for (double v : labels.data()) out.push_back(static_cast<int>(v));
    return out;
  }
  FeatureBank subset(std::span<const std::size_t> rows) const {
    return {gather_rows(features, rows), gather_rows(labels, rows)};
  }
};

/// FC1 features of every KK item (label 0) followed by every KUT item (label 1).
inline FeatureBank build_feature_bank(const nn::BackboneNet& backbone, const data::LabeledDataset& d_kk,
                                      const data::LabeledDataset& d_kut) {
  if (d_kut.empty()) throw InvalidArgument("KUT set empty; lower T");
  if (d_kk.empty()) throw InvalidArgument("build_feature_bank: known-known set is empty");
  const Tensor kk = backbone.forward(d_kk.stacked()).fc1_features;
  const Tensor kut = backbone.forward(d_kut.stacked()).fc1_features;
  FeatureBank bank{concat_rows(kk, kut), Tensor({d_kk.size() + d_kut.size(), 1})};
  for (std::size_t i = d_kk.size(); i < bank.size(); ++i) bank.labels[i] = 1.0;
  return bank;
}

/// Stratified seeded partition of a bank: each label's rows are shuffled and
/// dealt round robin into `folds` groups. Returns the fold of every row.
inline std::vector<std::size_t> stratified_folds(const FeatureBank& bank, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> fold(bank.size());
  for (int label : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (bank.labels[i] == double(label)) rows.push_back(i);
    }
    const auto perm = permutation(rows.size(), derive_seed(seed, "folds", static_cast<std::uint64_t>(label)));
    for (std::size_t r = 0; r < rows.size(); ++r) fold[rows[perm[r]]] = r % folds;
  }
  return fold;
}

/// Rows of `bank` held out for threshold estimation (fraction of each label)
/// and the remainder.
struct BankSplit {
  FeatureBank train;
  FeatureBank holdout;
};

inline BankSplit split_bank(const FeatureBank& bank, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw InvalidArgument("split_bank: fraction must lie in (0, 1)");
  std::vector<std::size_t> train, hold;
  for (int label : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < bank.size(); ++i) {
      if (bank.labels[i] == double(label)) rows.push_back(i);
    }
    const auto perm = permutation(rows.size(), derive_seed(seed, "holdout", static_cast<std::uint64_t>(label)));
    const auto n_hold = static_cast<std::size_t>(std::llround(double(rows.size()) * holdout_fraction));
    for (std::size_t r = 0; r < rows.size(); ++r) (r < n_hold ? hold : train).push_back(rows[perm[r]]);
  }
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {bank.subset(train), bank.subset(hold)};
}

/// Two hidden dense+relu layers of width H and one sigmoid output.
class ConfidenceSubnetwork {
 public:
  ConfidenceSubnetwork() = default;

  explicit ConfidenceSubnetwork(nn::Network net) : net_(std::move(net)) {
    const auto& l = net_.layers();
    const bool ok = net_.head() == nn::Head::sigmoid && l.size() == 5 && std::holds_alternative<nn::Dense>(l[0]) &&
                    std::holds_alternative<nn::Relu>(l[1]) && std::holds_alternative<nn::Dense>(l[2]) &&
                    std::holds_alternative<nn::Relu>(l[3]) && std::holds_alternative<nn::Dense>(l[4]) &&
                    net_.output_dim() == 1;
    if (!ok) throw ShapeError("confidence subnetwork must be dense-relu-dense-relu-dense with one sigmoid output");
  }

  static ConfidenceSubnetwork build(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
    if (input_dim == 0 || hidden == 0) throw InvalidArgument("confidence subnetwork widths must be positive");
    using nn::LayerSpec;
    return ConfidenceSubnetwork(nn::Network::build({LayerSpec::dense(input_dim, hidden), LayerSpec::relu(),
                                                    LayerSpec::dense(hidden, hidden), LayerSpec::relu(),
                                                    LayerSpec::dense(hidden, 1)},
                                                   nn::Head::sigmoid, {input_dim}, seed));
  }

  const nn::Network& network() const { return net_; }
  nn::Network& network() { return net_; }
  std::size_t input_dim() const { return net_.sample_shape()[0]; }
  std::size_t hidden_width() const { return std::get<nn::Dense>(net_.layers()[0]).out_dim(); }

  /// S for every row of `features`.
  std::vector<double> score(const Tensor& features) const {
    const Tensor s = net_.predict(features);
    return {s.data().begin(), s.data().end()};
  }

  friend bool operator==(const ConfidenceSubnetwork&, const ConfidenceSubnetwork&) = default;

 private:
  nn::Network net_;
};

/// {d/2, d, 2d}, matching the 64/128/256 grid used for 128-d features.
inline std::vector<std::size_t> default_hidden_grid(std::size_t feature_width) {
  return {std::max<std::size_t>(1, feature_width / 2), feature_width, 2 * feature_width};
}

struct CsTrainOptions {
  std::vector<std::size_t> hidden_widths;  // empty: default_hidden_grid
  std::size_t folds = 10;
  nn::GdxTrainOptions gdx;
  std::uint64_t seed = 0;
};

struct HiddenCandidate {
  std::size_t hidden = 0;
  std::vector<double> fold_auroc;  // folds lacking a label are skipped
  double mean_auroc = 0.0;
};

struct CsTrainResult {
  ConfidenceSubnetwork cs;
  std::vector<HiddenCandidate> candidates;
  std::size_t chosen_hidden = 0;
  nn::GdxTrainResult final_fit;
};

inline ConfidenceSubnetwork fit_cs(const FeatureBank& bank, std::size_t hidden, const nn::GdxTrainOptions& gdx,
                                   std::uint64_t seed) {
  auto cs = ConfidenceSubnetwork::build(bank.width(), hidden, seed);
  nn::train_gdx(cs.network(), bank.features, bank.labels, gdx);
  return cs;
}

/// k-fold model selection over hidden widths by mean validation AUROC (ties
/// go to the smaller width), then a final fit of the winner on the full bank.
/// A single candidate width needs no selection, so its folds are skipped.
inline CsTrainResult train_cs(const FeatureBank& bank, const CsTrainOptions& opt) {
  if (bank.size() == 0 || bank.count(0) == 0 || bank.count(1) == 0) {
    throw InvalidArgument("train_cs: feature bank must contain both labels");
  }
  if (opt.folds < 2) throw InvalidArgument("train_cs: need at least 2 folds");
  auto grid = opt.hidden_widths.empty() ? default_hidden_grid(bank.width()) : opt.hidden_widths;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const auto fold = stratified_folds(bank, opt.folds, derive_seed(opt.seed, "cs-folds"));
  CsTrainResult result;
  if (grid.size() == 1) result.candidates.push_back({grid[0], {}, 0.0});
  for (std::size_t h : grid) {
    if (grid.size() == 1) break;
    HiddenCandidate cand{h, {}, 0.0};
    for (std::size_t f = 0; f < opt.folds; ++f) {
      std::vector<std::size_t> train, val;
      for (std::size_t i = 0; i < bank.size(); ++i) (fold[i] == f ? val : train).push_back(i);
      const FeatureBank vb = bank.subset(val);
      const FeatureBank tb = bank.subset(train);
      if (vb.count(0) == 0 || vb.count(1) == 0 || tb.count(0) == 0 || tb.count(1) == 0) continue;
      const auto cs = fit_cs(tb, h, opt.gdx, derive_seed(opt.seed, "cs-fold-init", h * 1000 + f));
      cand.fold_auroc.push_back(eval::roc_auroc(cs.score(vb.features), vb.int_labels()).auroc);
    }
    if (cand.fold_auroc.empty()) throw InvalidArgument("train_cs: no fold contains both labels; use fewer folds");
    double s = 0.0;
    for (double a : cand.fold_auroc) s += a;
    cand.mean_auroc = s / static_cast<double>(cand.fold_auroc.size());
    result.candidates.push_back(std::move(cand));
  }
  const auto best = std::max_element(result.candidates.begin(), result.candidates.end(),
                                     [](const HiddenCandidate& a, const HiddenCandidate& b) {
                                       return a.mean_auroc < b.mean_auroc;
                                     });
  result.chosen_hidden = best->hidden;
  result.cs = ConfidenceSubnetwork::build(bank.width(), result.chosen_hidden,
                                          derive_seed(opt.seed, "cs-final-init", result.chosen_hidden));
  result.final_fit = nn::train_gdx(result.cs.network(), bank.features, bank.labels, opt.gdx);
  return result;
}

}  // namespace osrlab::osrnet
