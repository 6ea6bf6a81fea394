#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/nn/network.hpp"
#include "osrlab/random.hpp"

namespace osrlab::nn {

struct LayerGradError {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::dense;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<LayerGradError> layers;
  double tolerance = 0.0;
  bool passed = true;

  /// "layer 2 (dense)" for every layer whose error reached the tolerance.
  std::vector<std::string> failing_layers() const {
    std::vector<std::string> out;
    for (const auto& l : layers) {
      if (!(l.max_relative_error < tolerance)) {
        out.push_back("layer " + std::to_string(l.layer) + " (" + to_string(l.kind) + ")");
      }
    }
    return out;
  }
};

struct GradCheckOptions {
  double h = 1e-6;
  double tolerance = 1e-6;
  std::size_t sample_count = 100;  // all parameters are checked when fewer exist
  std::uint64_t seed = 0;
  /// Applied to the analytic gradients before comparison (fault injection).
  std::function<void(Gradients&)> tamper;
};

/// Compares backpropagated gradients of the batch-mean objective with
/// central differences on a random sample of parameters. The relative error
/// is |analytic - numeric| / max(1, |numeric|).
inline GradCheckReport grad_check(const Network& net, const Tensor& batch, const Tensor& targets,
                                  const GradCheckOptions& opt = {}) {
  if (opt.h < 1e-8 || opt.h > 1e-4) throw InvalidArgument("grad_check: h must lie in [1e-8, 1e-4]");
  Network probe = net;
  Gradients analytic = probe.gradients(batch, targets);
  if (opt.tamper) opt.tamper(analytic);

  auto params = probe.parameters();
  const auto owners = probe.parameter_layers();

  // Flat (tensor, element) index of every scalar parameter.
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t k = 0; k < params[t]->size(); ++k) all.emplace_back(t, k);
  }
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  if (all.size() <= opt.sample_count) {
    chosen = all;
  } else {
    const auto order = permutation(all.size(), opt.seed);
    for (std::size_t i = 0; i < opt.sample_count; ++i) chosen.push_back(all[order[i]]);
    std::sort(chosen.begin(), chosen.end());
  }

  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t li = 0; li < probe.layers().size(); ++li) {
    if (param_count(probe.layers()[li]) > 0) {
      report.layers.push_back({li, spec_of(probe.layers()[li]).kind, 0.0, 0});
    }
  }
  auto entry_for = [&](std::size_t layer) -> LayerGradError& {
    for (auto& e : report.layers) {
      if (e.layer == layer) return e;
    }
    throw Error("grad_check: no parameters on layer " + std::to_string(layer));
  };

  for (auto [t, k] : chosen) {
    double& w = (*params[t])[k];
    const double saved = w;
    w = saved + opt.h;
    const double plus = probe.objective_of(batch, targets);
    w = saved - opt.h;
    const double minus = probe.objective_of(batch, targets);
    w = saved;
    const double numeric = (plus - minus) / (2.0 * opt.h);
    const double rel = std::abs(analytic[t][k] - numeric) / std::max(1.0, std::abs(numeric));
    auto& e = entry_for(owners[t]);
    e.max_relative_error = std::max(e.max_relative_error, rel);
    ++e.checked;
  }
  for (const auto& e : report.layers) {
    if (!(e.max_relative_error < opt.tolerance)) report.passed = false;
  }
  return report;
}

}  // namespace osrlab::nn
