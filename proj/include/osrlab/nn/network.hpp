#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/nn/layers.hpp"
#include "osrlab/nn/loss.hpp"
#include "osrlab/random.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::nn {

/// Output non-linearity paired with its training objective: softmax with
/// multi-class cross-entropy, sigmoid with binary cross-entropy.
enum class Head { softmax, sigmoid };

inline std::string to_string(Head h) { return h == Head::softmax ? "softmax" : "sigmoid"; }

inline Head head_from_string(const std::string& s) {
  if (s == "softmax") return Head::softmax;
  if (s == "sigmoid") return Head::sigmoid;
  throw FormatError("unknown output head '" + s + "'");
}

/// One gradient tensor per parameter tensor, in parameters() order.
using Gradients = std::vector<Tensor>;

/// A plain layer stack with an output head. Inference methods are const and
/// safe to call concurrently.
class Network {
 public:
  Network() = default;

  Network(std::vector<Layer> layers, Head head, Shape sample_shape)
      : layers_(std::move(layers)), head_(head), sample_shape_(std::move(sample_shape)) {
    validate();
  }

  static Network build(const std::vector<LayerSpec>& specs, Head head, Shape sample_shape,
                       std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Layer> layers;
    layers.reserve(specs.size());
    for (const auto& s : specs) layers.push_back(make_layer(s, rng));
    return Network(std::move(layers), head, std::move(sample_shape));
  }

  const std::vector<Layer>& layers() const { return layers_; }
  Head head() const { return head_; }
  const Shape& sample_shape() const { return sample_shape_; }
  std::size_t output_dim() const { return output_dim_; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(spec_of(l));
    return out;
  }

  /// Activations of every layer: acts[0] is the input, acts[i+1] the output
  /// of layer i. `output` is the head applied to the final activation.
  struct Trace {
    std::vector<Tensor> acts;
    Tensor output;
  };

  Trace trace(const Tensor& batch) const {
    check_input_impl(batch);
    Trace t;
    t.acts.reserve(layers_.size() + 1);
    t.acts.push_back(batch);
    for (const auto& layer : layers_) t.acts.push_back(forward(layer, t.acts.back()));
    t.output = apply_head(t.acts.back());
    return t;
  }

  /// Pre-head outputs.
  Tensor logits(const Tensor& batch) const {
    check_input_impl(batch);
    Tensor x = batch;
    for (const auto& layer : layers_) x = forward(layer, x);
    return x;
  }

  Tensor predict(const Tensor& batch) const { return apply_head(logits(batch)); }

  Tensor apply_head(const Tensor& logits) const {
    return head_ == Head::softmax ? softmax(logits) : sigmoid(logits);
  }

  /// Batch-mean training objective: multi-class CE / B for softmax heads,
  /// binary CE (already a mean) for sigmoid heads.
  double objective(const Tensor& output, const Tensor& targets) const {
    if (head_ == Head::softmax) {
      const auto b = static_cast<double>(std::max<std::size_t>(output.dim(0), 1));
      return multiclass_ce_loss(output, targets) / b;
    }
    return binary_ce_loss(output, targets);
  }

  double objective_of(const Tensor& batch, const Tensor& targets) const {
    return objective(predict(batch), targets);
  }

  /// Backpropagates the batch-mean objective through a trace.
  Gradients gradients(const Trace& t, const Tensor& targets) const {
    if (t.output.shape() != targets.shape()) {
      throw ShapeError("targets " + shape_string(targets.shape()) + " do not match outputs " +
                       shape_string(t.output.shape()));
    }
    const auto b = static_cast<double>(std::max<std::size_t>(targets.dim(0), 1));
    // Both head/loss pairs share the logit gradient (y - t) / B.
    Tensor delta = t.output;
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = (delta[i] - targets[i]) / b;

    Gradients grads = zero_gradients();
    std::size_t slot = grads.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& layer = layers_[li];
      const Tensor& x = t.acts[li];
      if (const auto* d = std::get_if<Dense>(&layer)) {
        slot -= 2;
        delta = detail::dense_backward(*d, x, delta, grads[slot], grads[slot + 1]);
      } else if (const auto* c = std::get_if<Conv2d>(&layer)) {
        slot -= 2;
        delta = detail::conv_backward(*c, x, delta, grads[slot], grads[slot + 1]);
      } else if (std::holds_alternative<Relu>(layer)) {
        for (std::size_t i = 0; i < delta.size(); ++i) {
          if (x[i] <= 0.0) delta[i] = 0.0;
        }
      } else {
        delta = delta.reshaped(x.shape());
      }
    }
    return grads;
  }

  Gradients gradients(const Tensor& batch, const Tensor& targets) const {
    return gradients(trace(batch), targets);
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<Dense>(&layer)) {
        out.push_back(&d->weight);
        out.push_back(&d->bias);
      } else if (auto* c = std::get_if<Conv2d>(&layer)) {
        out.push_back(&c->weight);
        out.push_back(&c->bias);
      }
    }
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (auto* p : const_cast<Network*>(this)->parameters()) out.push_back(p);
    return out;
  }

  /// Layer index owning each parameter tensor.
  std::vector<std::size_t> parameter_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      for (std::size_t k = 0; k < param_count(layers_[i]); ++k) out.push_back(i);
    }
    return out;
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const Tensor* p : parameters()) g.emplace_back(p->shape());
    return g;
  }

  /// Throws ShapeError naming layer 0 unless batch is [B x sample_shape].
  void check_input(const Tensor& batch) const { check_input_impl(batch); }

  friend bool operator==(const Network& a, const Network& b) {
    if (a.head_ != b.head_ || a.sample_shape_ != b.sample_shape_ || a.specs() != b.specs()) return false;
    auto pa = a.parameters();
    auto pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (!(*pa[i] == *pb[i])) return false;
    }
    return true;
  }

 private:
  void validate() {
    if (layers_.empty()) throw ShapeError("network has no layers");
    Shape s = sample_shape_;
    s.insert(s.begin(), 1);
    for (std::size_t i = 0; i < layers_.size(); ++i) s = output_shape(layers_[i], s, i);
    if (s.size() != 2) throw ShapeError("network output must be [batch x K], got " + shape_string(s));
    output_dim_ = s[1];
    if (head_ == Head::sigmoid && output_dim_ != 1) {
      throw ShapeError("sigmoid head needs a single output unit, got " + std::to_string(output_dim_));
    }
  }

  void check_input_impl(const Tensor& batch) const {
    const Shape& in = batch.shape();
    if (in.size() != sample_shape_.size() + 1 ||
        !std::equal(sample_shape_.begin(), sample_shape_.end(), in.begin() + 1)) {
      throw ShapeError("layer 0 (" + to_string(spec_of(layers_.front()).kind) + "): expects [batch x " +
                       shape_string(sample_shape_) + "], got input " + shape_string(in));
    }
  }

  std::vector<Layer> layers_;
  Head head_ = Head::softmax;
  Shape sample_shape_;
  std::size_t output_dim_ = 0;
};

}  // namespace osrlab::nn
