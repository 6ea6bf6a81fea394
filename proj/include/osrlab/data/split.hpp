#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"
#include "osrlab/random.hpp"

namespace osrlab::data {

/// 1 - sqrt(|N| / |Q|), where N are the known classes and Q all classes
/// present at test time.
inline double openness(std::size_t n_kk_classes, std::size_t n_total_test_classes) {
  if (n_total_test_classes == 0) throw InvalidArgument("openness: no test classes");
  if (n_kk_classes == 0) throw InvalidArgument("openness: no known classes");
  if (n_total_test_classes < n_kk_classes) {
    throw InvalidArgument("openness: fewer test classes than known classes");
  }
  return 1.0 - std::sqrt(static_cast<double>(n_kk_classes) / static_cast<double>(n_total_test_classes));
}

struct SplitSpec {
  std::set<std::size_t> kk_class_ids;
  std::set<std::size_t> uu_class_ids;
  std::uint64_t seed = 0;
};

/// No unknown-class training fold exists; unknown classes only contribute
/// their test fold.
struct SplitResult {
  LabeledDataset d_kk_train;
  LabeledDataset d_kk_test;
  LabeledDataset d_uu_test;
};

/// Picks `n_kk` known classes at random (seeded); the rest become unknown.
inline SplitSpec random_split_spec(std::size_t n_classes, std::size_t n_kk, std::uint64_t seed) {
  if (n_kk == 0 || n_kk >= n_classes) throw InvalidArgument("random split needs 0 < n_kk < n_classes");
  const auto order = permutation(n_classes, derive_seed(seed, "class-selection"));
  SplitSpec spec;
  spec.seed = seed;
  for (std::size_t i = 0; i < n_classes; ++i) (i < n_kk ? spec.kk_class_ids : spec.uu_class_ids).insert(order[i]);
  return spec;
}

/// Per class, a seeded shuffle puts round(n * test_fraction) items in the
/// test fold. Known classes are renumbered 0..K-1 in ascending id order;
/// unknown classes likewise in their own dataset. Train and test folds are
/// shuffled once more so classes interleave.
inline SplitResult split_kk_uu(const LabeledDataset& ds, const SplitSpec& spec, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test_fraction must lie in (0, 1)");
  if (spec.kk_class_ids.empty()) throw InvalidArgument("split needs at least one known class");
  for (std::size_t id : spec.kk_class_ids) {
    if (spec.uu_class_ids.count(id)) {
      throw InvalidArgument("class '" + ds.class_names().at(id) + "' is both known and unknown");
    }
  }
  for (const auto* ids : {&spec.kk_class_ids, &spec.uu_class_ids}) {
    for (std::size_t id : *ids) {
      if (id >= ds.class_names().size()) {
        throw InvalidArgument("split references class id " + std::to_string(id) + " not in dataset");
      }
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds[i].class_id].push_back(i);

  auto names_of = [&](const std::set<std::size_t>& ids) {
    std::vector<std::string> names;
    for (std::size_t id : ids) names.push_back(ds.class_names()[id]);
    return names;
  };
  SplitResult out{LabeledDataset(ds.kind(), ds.sample_shape(), names_of(spec.kk_class_ids)),
                  LabeledDataset(ds.kind(), ds.sample_shape(), names_of(spec.kk_class_ids)),
                  LabeledDataset(ds.kind(), ds.sample_shape(), names_of(spec.uu_class_ids))};

  std::vector<std::pair<std::size_t, std::size_t>> train, kk_test, uu_test;  // (source index, new id)
  auto fold = [&](const std::set<std::size_t>& ids, bool keep_train, auto& test_sink) {
    std::size_t new_id = 0;
    for (std::size_t id : ids) {
      std::vector<std::size_t> members = by_class[id];
      Rng rng(derive_seed(spec.seed, "split-class", id));
      rng.shuffle(members);
      const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (k < n_test) {
          test_sink.emplace_back(members[k], new_id);
        } else if (keep_train) {
          train.emplace_back(members[k], new_id);
        }
      }
      ++new_id;
    }
  };
  fold(spec.kk_class_ids, true, kk_test);
  fold(spec.uu_class_ids, false, uu_test);

  auto emit = [&](std::vector<std::pair<std::size_t, std::size_t>>& src, LabeledDataset& dst, const char* tag) {
    Rng rng(derive_seed(spec.seed, tag));
    rng.shuffle(src);
    for (auto [idx, id] : src) dst.add(ds[idx].sample, id, ds[idx].origin);
  };
  emit(train, out.d_kk_train, "split-kk-train");
  emit(kk_test, out.d_kk_test, "split-kk-test");
  emit(uu_test, out.d_uu_test, "split-uu-test");
  return out;
}

}  // namespace osrlab::data
