#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/eval/mmd.hpp"
#include "osrlab/nn/backbone.hpp"

namespace osrlab::eval {

struct NamedSet {
  std::string name;
  const data::LabeledDataset* data = nullptr;
};

struct DistanceEntry {
  std::string name;
  MmdResult mmd;
};

/// MMD from the final-FC features of `d_kk` to each named set, sorted by
/// ascending distance (name breaks ties).
inline std::vector<DistanceEntry> compare_distribution_distances(const nn::BackboneNet& backbone,
                                                                 const data::LabeledDataset& d_kk,
                                                                 const std::vector<NamedSet>& others,
                                                                 Kernel kernel = Kernel::rbf()) {
  std::vector<DistanceEntry> table;
  if (others.empty()) return table;
  const Tensor kk = backbone.final_fc(d_kk.stacked());
  for (const auto& o : others) {
    if (o.data == nullptr) throw InvalidArgument("compare_distribution_distances: null set '" + o.name + "'");
    table.push_back({o.name, mmd(kk, backbone.final_fc(o.data->stacked()), kernel)});
  }
  std::stable_sort(table.begin(), table.end(), [](const DistanceEntry& a, const DistanceEntry& b) {
    return a.mmd.distance != b.mmd.distance ? a.mmd.distance < b.mmd.distance : a.name < b.name;
  });
  return table;
}

}  // namespace osrlab::eval
