#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/nn/network.hpp"
#include "osrlab/random.hpp"

namespace osrlab::nn {

/// Gradient descent with momentum and an adaptive learning rate. The rate
/// grows after every improving step; a step whose loss exceeds the last
/// accepted loss by more than `max_loss_increase_ratio` is undone.
struct GdxParams {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lr_increase = 1.05;
  double lr_decrease = 0.7;
  double max_loss_increase_ratio = 1.04;
};

inline constexpr double kMinLearningRate = 1e-12;

enum class GdxStatus { accepted, rejected, collapsed };

struct GdxState {
  GdxParams params;
  double learning_rate = 0.01;
  double loss_prev = std::numeric_limits<double>::infinity();
  std::vector<Tensor> velocity;
  std::vector<Tensor> accepted;  // parameters at the last accepted loss

  explicit GdxState(GdxParams p = {}) : params(p), learning_rate(p.learning_rate) {
    if (!(p.learning_rate > 0.0)) throw InvalidArgument("GDX learning rate must be positive");
    if (p.momentum < 0.0 || p.momentum >= 1.0) throw InvalidArgument("GDX momentum must lie in [0, 1)");
    if (!(p.lr_increase > 1.0)) throw InvalidArgument("GDX lr_increase must exceed 1");
    if (!(p.lr_decrease > 0.0 && p.lr_decrease < 1.0)) throw InvalidArgument("GDX lr_decrease must lie in (0, 1)");
    if (!(p.max_loss_increase_ratio > 1.0)) throw InvalidArgument("GDX max_loss_increase_ratio must exceed 1");
  }
};

/// One GDX iteration. `loss_now` and `grads` are evaluated at the current
/// `params`; the comparison baseline is `state.loss_prev`, the loss of the
/// last accepted point (+inf before the first step).
///
/// Accepted: the rate grows if the loss improved, then
/// velocity = momentum * velocity - lr * grad and params += velocity, using
/// the rate from before the increase. Rejected: params are restored to the
/// last accepted point, velocity is zeroed and the rate shrinks.
inline GdxStatus gdx_step(GdxState& state, const std::vector<Tensor*>& params, const Gradients& grads,
                          double loss_now) {
  if (grads.size() != params.size()) throw ShapeError("gdx_step: gradient count does not match parameters");
  if (state.velocity.empty()) {
    for (const Tensor* p : params) state.velocity.emplace_back(p->shape());
  }
  const double loss_prev = state.loss_prev;
  if (std::isfinite(loss_prev) && loss_now > state.params.max_loss_increase_ratio * loss_prev) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!state.accepted.empty()) *params[i] = state.accepted[i];
      state.velocity[i].fill(0.0);
    }
    state.learning_rate *= state.params.lr_decrease;
    return state.learning_rate < kMinLearningRate ? GdxStatus::collapsed : GdxStatus::rejected;
  }

  const double lr = state.learning_rate;
  if (loss_now < loss_prev) state.learning_rate *= state.params.lr_increase;
  state.loss_prev = loss_now;
  state.accepted.clear();
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.accepted.push_back(*params[i]);
    auto v = state.velocity[i].data();
    auto p = params[i]->data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = state.params.momentum * v[k] - lr * g[k];
      p[k] += v[k];
    }
  }
  return GdxStatus::accepted;
}

/// Variant with an explicit comparison baseline (overrides state.loss_prev).
inline GdxStatus gdx_step(GdxState& state, const std::vector<Tensor*>& params, const Gradients& grads,
                          double loss_now, double loss_prev) {
  state.loss_prev = loss_prev;
  return gdx_step(state, params, grads, loss_now);
}

struct GdxTrainOptions {
  GdxParams gdx;
  std::size_t max_epochs = 300;
  double loss_goal = 0.0;
};

struct GdxTrainResult {
  std::size_t epochs = 0;
  double final_loss = 0.0;
  bool collapsed = false;
};

/// Full-batch GDX training of the batch-mean objective.
inline GdxTrainResult train_gdx(Network& net, const Tensor& inputs, const Tensor& targets,
                                const GdxTrainOptions& opt) {
  GdxState state(opt.gdx);
  auto params = net.parameters();
  GdxTrainResult result;
  for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
    const auto trace = net.trace(inputs);
    const double loss = net.objective(trace.output, targets);
    result.epochs = epoch + 1;
    result.final_loss = std::min(loss, state.loss_prev);
    if (loss <= opt.loss_goal) break;
    const auto status = gdx_step(state, params, net.gradients(trace, targets), loss);
    if (status == GdxStatus::collapsed) {
      result.collapsed = true;
      break;
    }
  }
  // Leave the network at the best accepted point.
  if (!state.accepted.empty()) {
    const double loss = net.objective_of(inputs, targets);
    if (loss > state.loss_prev) {
      for (std::size_t i = 0; i < params.size(); ++i) *params[i] = state.accepted[i];
    }
    result.final_loss = std::min(loss, state.loss_prev);
  }
  return result;
}

struct SgdOptions {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
};

/// Minibatch SGD with momentum; the sample order is reshuffled every epoch
/// from `seed`. `augment`, if set, transforms each minibatch in place before
/// the forward pass.
template <typename Augment>
double train_sgd(Network& net, const Tensor& inputs, const Tensor& targets, const SgdOptions& opt,
                 std::uint64_t seed, Augment&& augment) {
  const std::size_t n = inputs.dim(0);
  if (n == 0) throw InvalidArgument("train_sgd: empty training set");
  auto params = net.parameters();
  std::vector<Tensor> velocity;
  for (const Tensor* p : params) velocity.emplace_back(p->shape());
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto order = permutation(n, derive_seed(seed, "sgd-epoch", epoch));
    Rng aug_rng(derive_seed(seed, "sgd-augment", epoch));
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t end = std::min(n, start + opt.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor xb = gather_rows(inputs, idx);
      const Tensor yb = gather_rows(targets, idx);
      augment(xb, aug_rng);
      const auto trace = net.trace(xb);
      epoch_loss += net.objective(trace.output, yb) * static_cast<double>(end - start);
      const auto grads = net.gradients(trace, yb);
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto v = velocity[i].data();
        auto p = params[i]->data();
        auto g = grads[i].data();
        for (std::size_t k = 0; k < v.size(); ++k) {
          v[k] = opt.momentum * v[k] - opt.learning_rate * g[k];
          p[k] += v[k];
        }
      }
    }
    epoch_loss /= static_cast<double>(n);
  }
  return epoch_loss;
}

inline double train_sgd(Network& net, const Tensor& inputs, const Tensor& targets, const SgdOptions& opt,
                        std::uint64_t seed) {
  return train_sgd(net, inputs, targets, opt, seed, [](Tensor&, Rng&) {});
}

}  // namespace osrlab::nn
