#pragma once

// The assembled recognizer: backbone for class scores, confidence
// subnetwork on FC1 features for the known/unknown gate.

#include <cstdint>
#include <string>
#include <vector>

#include "osrlab/data/csv.hpp"
#include "osrlab/error.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/nn/checkpoint.hpp"
#include "osrlab/osrnet/confidence.hpp"

namespace osrlab::osrnet {

struct OsrNet {
  nn::BackboneNet backbone;
  ConfidenceSubnetwork cs;
  double delta = 0.5;

  friend bool operator==(const OsrNet&, const OsrNet&) = default;
};

inline OsrNet assemble(nn::BackboneNet backbone, ConfidenceSubnetwork cs, double delta) {
  if (cs.input_dim() != backbone.fc1_width()) {
    throw ShapeError("assemble: confidence subnetwork expects width " + std::to_string(cs.input_dim()) +
                     " but FC1 has width " + std::to_string(backbone.fc1_width()));
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("assemble: delta must lie in (0, 1)");
  return {std::move(backbone), std::move(cs), delta};
}

/// Known iff S < delta.
inline bool is_known(double s, double delta) { return s < delta; }

struct Verdict {
  bool known = false;
  std::size_t class_id = 0;  // argmax of the class probabilities, always set
  double max_prob = 0.0;
  double s = 0.0;
};

struct Inference {
  Tensor class_probs;  // [B x N], never suppressed by the gate
  std::vector<Verdict> verdicts;
};

inline Inference osrnet_infer(const OsrNet& net, const Tensor& batch) {
  const auto out = net.backbone.forward(batch);
  const auto s = net.cs.score(out.fc1_features);
  Inference r{out.probs, {}};
  r.verdicts.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto row = out.probs.row(i);
    const auto top = std::max_element(row.begin(), row.end());
    r.verdicts.push_back({is_known(s[i], net.delta), static_cast<std::size_t>(top - row.begin()), *top, s[i]});
  }
  return r;
}

/// item_id,argmax_class,max_prob,S,verdict
inline void write_verdicts_csv(const std::vector<Verdict>& verdicts, const std::string& path) {
  std::string text = "item_id,argmax_class,max_prob,S,verdict\n";
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    text += std::to_string(i) + "," + std::to_string(v.class_id) + "," + data::format_double(v.max_prob) + "," +
            data::format_double(v.s) + "," + (v.known ? "known" : "unknown") + "\n";
  }
  nn::write_text_file(path, text);
}

struct OsrNetCheckpoint {
  OsrNet net;
  std::uint64_t seed = 0;
  nn::ordered_json metadata = nn::ordered_json::object();
};

inline std::string osrnet_to_text(const OsrNetCheckpoint& c) {
  nn::ordered_json j = nn::checkpoint_header("osrnet", c.seed);
  j["backbone"] = nn::network_to_json(c.net.backbone.network());
  j["cs"] = nn::network_to_json(c.net.cs.network());
  j["delta"] = c.net.delta;
  j["metadata"] = c.metadata;
  return nn::to_text(j);
}

inline OsrNetCheckpoint osrnet_from_text(const std::string& text) {
  const auto j = nn::parse_text(text);
  nn::check_header(j, "osrnet");
  OsrNetCheckpoint c;
  try {
    c.net = assemble(nn::BackboneNet(nn::network_from_json(nn::detail::require(j, "backbone"))),
                     ConfidenceSubnetwork(nn::network_from_json(nn::detail::require(j, "cs"))),
                     nn::detail::require(j, "delta").get<double>());
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  if (j.contains("metadata")) c.metadata = j.at("metadata");
  return c;
}

struct CsCheckpoint {
  ConfidenceSubnetwork cs;
  std::uint64_t seed = 0;
  nn::ordered_json metadata = nn::ordered_json::object();
};

inline std::string cs_to_text(const CsCheckpoint& c) {
  nn::ordered_json j = nn::checkpoint_header("confidence_subnetwork", c.seed);
  j["network"] = nn::network_to_json(c.cs.network());
  j["metadata"] = c.metadata;
  return nn::to_text(j);
}

inline CsCheckpoint cs_from_text(const std::string& text) {
  const auto j = nn::parse_text(text);
  nn::check_header(j, "confidence_subnetwork");
  CsCheckpoint c;
  c.cs = ConfidenceSubnetwork(nn::network_from_json(nn::detail::require(j, "network")));
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("metadata")) c.metadata = j.at("metadata");
  return c;
}

}  // namespace osrlab::osrnet
