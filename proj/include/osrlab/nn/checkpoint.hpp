#pragma once

// Text checkpoints. A checkpoint is a JSON document whose keys are emitted in
// a fixed order, with parameters written as shortest round-trip decimals, so
// byte equality of two files implies equality of the models they hold.
//
//   format_version  integer, currently 1
//   kind            "backbone" | "confidence_subnetwork" | "osrnet"
//   seed            RNG seed the model was initialised from
//   network         {head, sample_shape, layers: [{kind, dims..., weight, bias}]}
//   metadata        free-form training metadata (ordered)
//
// Assembled models replace `network` by `backbone` and `cs` and add `delta`.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "osrlab/error.hpp"
#include "osrlab/nn/backbone.hpp"
#include "osrlab/nn/network.hpp"

namespace osrlab::nn {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kCheckpointFormatVersion = 1;

namespace detail {

inline ordered_json tensor_values(const Tensor& t) { return ordered_json(t.storage()); }

inline Tensor tensor_from(const ordered_json& j, Shape shape, const std::string& what) {
  if (!j.is_array()) throw FormatError("checkpoint: '" + what + "' must be an array");
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw FormatError("checkpoint: non-numeric value in '" + what + "'");
    values.push_back(v.get<double>());
  }
  if (values.size() != shape_size(shape)) {
    throw FormatError("checkpoint: '" + what + "' has " + std::to_string(values.size()) + " values, expected " +
                      std::to_string(shape_size(shape)));
  }
  return Tensor(std::move(shape), std::move(values));
}

inline const ordered_json& require(const ordered_json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("checkpoint: missing key '") + key + "'");
  return j.at(key);
}

}  // namespace detail

inline ordered_json network_to_json(const Network& net) {
  ordered_json j;
  j["head"] = to_string(net.head());
  j["sample_shape"] = net.sample_shape();
  ordered_json layers = ordered_json::array();
  for (const auto& layer : net.layers()) {
    ordered_json l;
    const LayerSpec s = spec_of(layer);
    l["kind"] = to_string(s.kind);
    if (const auto* d = std::get_if<Dense>(&layer)) {
      l["in_dim"] = s.in_dim;
      l["out_dim"] = s.out_dim;
      l["weight"] = detail::tensor_values(d->weight);
      l["bias"] = detail::tensor_values(d->bias);
    } else if (const auto* c = std::get_if<Conv2d>(&layer)) {
      l["in_channels"] = s.in_channels;
      l["out_channels"] = s.out_channels;
      l["weight"] = detail::tensor_values(c->weight);
      l["bias"] = detail::tensor_values(c->bias);
    }
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

inline Network network_from_json(const ordered_json& j) {
  try {
    const Head head = head_from_string(detail::require(j, "head").get<std::string>());
    const Shape sample_shape = detail::require(j, "sample_shape").get<Shape>();
    std::vector<Layer> layers;
    for (const auto& l : detail::require(j, "layers")) {
      const LayerKind kind = layer_kind_from_string(detail::require(l, "kind").get<std::string>());
      switch (kind) {
        case LayerKind::dense: {
          const auto in = detail::require(l, "in_dim").get<std::size_t>();
          const auto out = detail::require(l, "out_dim").get<std::size_t>();
          layers.push_back(Dense{detail::tensor_from(detail::require(l, "weight"), {out, in}, "weight"),
                                 detail::tensor_from(detail::require(l, "bias"), {out}, "bias")});
          break;
        }
        case LayerKind::conv2d: {
          const auto in = detail::require(l, "in_channels").get<std::size_t>();
          const auto out = detail::require(l, "out_channels").get<std::size_t>();
          layers.push_back(Conv2d{detail::tensor_from(detail::require(l, "weight"), {out, in, 3, 3}, "weight"),
                                  detail::tensor_from(detail::require(l, "bias"), {out}, "bias")});
          break;
        }
        case LayerKind::relu: layers.push_back(Relu{}); break;
        case LayerKind::flatten: layers.push_back(Flatten{}); break;
        case LayerKind::softmax: throw FormatError("checkpoint: softmax is encoded as the head");
      }
    }
    return Network(std::move(layers), head, sample_shape);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline ordered_json checkpoint_header(const std::string& kind, std::uint64_t seed) {
  ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["kind"] = kind;
  j["seed"] = seed;
  return j;
}

inline void check_header(const ordered_json& j, const std::string& kind) {
  if (detail::require(j, "format_version") != kCheckpointFormatVersion) {
    throw FormatError("checkpoint: unsupported format_version");
  }
  if (detail::require(j, "kind") != kind) {
    throw FormatError("checkpoint: expected kind '" + kind + "', found " + j.at("kind").dump());
  }
}

inline std::string to_text(const ordered_json& j) { return j.dump() + "\n"; }

inline ordered_json parse_text(const std::string& text) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct BackboneCheckpoint {
  BackboneNet backbone;
  std::uint64_t seed = 0;
  ordered_json metadata = ordered_json::object();
};

inline std::string backbone_to_text(const BackboneCheckpoint& c) {
  ordered_json j = checkpoint_header("backbone", c.seed);
  j["network"] = network_to_json(c.backbone.network());
  j["metadata"] = c.metadata;
  return to_text(j);
}

inline BackboneCheckpoint backbone_from_text(const std::string& text) {
  const ordered_json j = parse_text(text);
  check_header(j, "backbone");
  BackboneCheckpoint c;
  c.backbone = BackboneNet(network_from_json(detail::require(j, "network")));
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("metadata")) c.metadata = j.at("metadata");
  return c;
}

}  // namespace osrlab::nn
