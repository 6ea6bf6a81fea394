#pragma once

#include <bit>
#include <optional>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/eval/metrics.hpp"
#include "osrlab/mining/kut.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/osrnet/confidence.hpp"

namespace osrlab::mining {

struct SweepRow {
  double t = 0.0;
  std::size_t kut_size = 0;
  std::optional<double> mean_entropy;
  std::optional<double> auroc;  // absent when T admits nothing
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

/// For each distinct T (first occurrence order): mine, train a CS on the
/// FC1 bank of `d_kk_train` vs the mined set, and score the evaluation folds
/// (`eval_known` as label 0, `eval_unknown` as label 1). Each T trains from a
/// seed derived from the T value itself, so rows do not depend on the order
/// or number of candidates.
inline SweepResult sweep_thresholds(const nn::BackboneNet& backbone, const ScoredAux& scored,
                                    const data::LabeledDataset& d_kk_train, const data::LabeledDataset& eval_known,
                                    const data::LabeledDataset& eval_unknown, const std::vector<double>& candidates,
                                    osrnet::CsTrainOptions cs_options, std::uint64_t seed) {
  SweepResult r;
  std::vector<double> ts;
  for (double t : candidates) {
    if (std::find(ts.begin(), ts.end(), t) != ts.end()) {
      r.warnings.push_back("duplicate threshold " + std::to_string(t) + " ignored");
    } else {
      ts.push_back(t);
    }
  }
  const Tensor known_feats = backbone.forward(eval_known.stacked()).fc1_features;
  const Tensor unknown_feats = backbone.forward(eval_unknown.stacked()).fc1_features;
  const Tensor eval_feats = concat_rows(known_feats, unknown_feats);
  std::vector<int> eval_labels(known_feats.dim(0), 0);
  eval_labels.resize(eval_feats.dim(0), 1);

  for (double t : ts) {
    const auto mined = mine_kut(scored, t);
    SweepRow row{t, mined.kut.size(), mined.mean_entropy, std::nullopt};
    if (mined.kut.empty()) {
      r.warnings.push_back("T = " + std::to_string(t) + ": " + mined.warning);
    } else {
      const auto bank = osrnet::build_feature_bank(backbone, d_kk_train, mined.kut);
      cs_options.seed = derive_seed(seed, "sweep", std::bit_cast<std::uint64_t>(t));
      const auto trained = osrnet::train_cs(bank, cs_options);
      row.auroc = eval::roc_auroc(trained.cs.score(eval_feats), eval_labels).auroc;
    }
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace osrlab::mining
