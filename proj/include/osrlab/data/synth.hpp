#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"
#include "osrlab/random.hpp"

namespace osrlab::data {

struct GaussianClass {
  std::string name;
  std::vector<double> mean;
  std::optional<double> scale = std::nullopt;  // overrides GaussianSpec::scale
};

struct GaussianSpec {
  std::vector<GaussianClass> classes;
  double scale = 1.0;  // isotropic standard deviation
  std::size_t count_per_class = 0;
  std::uint64_t seed = 0;
  std::string origin = "synthetic";
};

/// Isotropic Gaussian blobs, one standard deviation per class, `count_per_class` samples each, classes in
/// declaration order. Each class draws from its own derived stream.
inline LabeledDataset synth_gaussians(const GaussianSpec& spec) {
  if (spec.classes.empty()) throw InvalidArgument("synth_gaussians: no classes");
  const std::size_t d = spec.classes.front().mean.size();
  if (d == 0) throw InvalidArgument("synth_gaussians: empty mean vector");
  std::vector<std::string> names;
  for (const auto& c : spec.classes) {
    if (c.mean.size() != d) throw InvalidArgument("synth_gaussians: class '" + c.name + "' mean has wrong dimension");
    if (!(c.scale.value_or(spec.scale) > 0.0)) {
      throw InvalidArgument("synth_gaussians: covariance scale of class '" + c.name + "' must be positive");
    }
    names.push_back(c.name);
  }
  LabeledDataset ds(DataKind::vector, {d}, names);
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    Rng rng(derive_seed(spec.seed, "gaussian-class", c));
    const double scale = spec.classes[c].scale.value_or(spec.scale);
    for (std::size_t i = 0; i < spec.count_per_class; ++i) {
      std::vector<double> x(d);
      for (std::size_t k = 0; k < d; ++k) x[k] = spec.classes[c].mean[k] + scale * rng.normal();
      ds.add(Tensor({d}, std::move(x)), c, spec.origin);
    }
  }
  return ds;
}

}  // namespace osrlab::data
