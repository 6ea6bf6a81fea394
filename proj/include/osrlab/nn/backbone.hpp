#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/nn/network.hpp"

namespace osrlab::nn {

/// Closed-set classifier: feature stack, then FC1 (dense + relu), then
/// FC_Soft (dense) and a softmax head. FC1 activations are what the
/// confidence subnetwork consumes.
class BackboneNet {
 public:
  struct Output {
    Tensor probs;         // [B x N]
    Tensor fc1_features;  // [B x d1], post-activation
  };

  BackboneNet() = default;

  explicit BackboneNet(Network net) : net_(std::move(net)) {
    const auto& layers = net_.layers();
    const std::size_t n = layers.size();
    if (net_.head() != Head::softmax || n < 3 || !std::holds_alternative<Dense>(layers[n - 3]) ||
        !std::holds_alternative<Relu>(layers[n - 2]) || !std::holds_alternative<Dense>(layers[n - 1])) {
      throw ShapeError("backbone must end with FC1 (dense, relu) followed by FC_Soft (dense) and softmax");
    }
  }

  /// Feature stack given as layer specs; FC1 and FC_Soft are appended.
  static BackboneNet build(std::vector<LayerSpec> features, std::size_t feature_dim, std::size_t fc1_width,
                           std::size_t classes, Shape sample_shape, std::uint64_t seed) {
    features.push_back(LayerSpec::dense(feature_dim, fc1_width));
    features.push_back(LayerSpec::relu());
    features.push_back(LayerSpec::dense(fc1_width, classes));
    return BackboneNet(Network::build(features, Head::softmax, std::move(sample_shape), seed));
  }

  /// Vector input: hidden dense+relu layers, then the FC1/FC_Soft head.
  static BackboneNet mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t fc1_width,
                         std::size_t classes, std::uint64_t seed) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input_dim;
    for (std::size_t h : hidden) {
      specs.push_back(LayerSpec::dense(prev, h));
      specs.push_back(LayerSpec::relu());
      prev = h;
    }
    return build(std::move(specs), prev, fc1_width, classes, {input_dim}, seed);
  }

  /// Image input [C x H x W]: 3x3 conv+relu blocks, flatten, then the head.
  static BackboneNet cnn(std::size_t channels, std::size_t height, std::size_t width,
                         const std::vector<std::size_t>& conv_channels, std::size_t fc1_width,
                         std::size_t classes, std::uint64_t seed) {
    std::vector<LayerSpec> specs;
    std::size_t prev = channels;
    for (std::size_t c : conv_channels) {
      specs.push_back(LayerSpec::conv2d(prev, c));
      specs.push_back(LayerSpec::relu());
      prev = c;
    }
    specs.push_back(LayerSpec::flatten());
    return build(std::move(specs), prev * height * width, fc1_width, classes, {channels, height, width}, seed);
  }

  const Network& network() const { return net_; }
  Network& network() { return net_; }

  std::size_t fc1_width() const { return std::get<Dense>(net_.layers()[net_.layers().size() - 3]).out_dim(); }
  std::size_t classes() const { return net_.output_dim(); }

  Output forward(const Tensor& batch) const {
    net_.check_input(batch);
    const auto& layers = net_.layers();
    const std::size_t fc1_out = layers.size() - 2;  // the relu after FC1
    Output out;
    Tensor x = batch;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = nn::forward(layers[i], x);
      if (i == fc1_out) out.fc1_features = x;
    }
    out.probs = softmax(x);
    return out;
  }

  Tensor probabilities(const Tensor& batch) const { return net_.predict(batch); }

  /// FC_Soft outputs (pre-softmax), the backbone's final FC layer.
  Tensor final_fc(const Tensor& batch) const { return net_.logits(batch); }

  friend bool operator==(const BackboneNet&, const BackboneNet&) = default;

 private:
  Network net_;
};

}  // namespace osrlab::nn
