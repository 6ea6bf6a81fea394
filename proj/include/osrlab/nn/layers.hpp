#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/random.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::nn {

enum class LayerKind { dense, relu, conv2d, flatten, softmax };

inline std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "relu") return LayerKind::relu;
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "flatten") return LayerKind::flatten;
  if (s == "softmax") return LayerKind::softmax;
  throw FormatError("unknown layer kind '" + s + "'");
}

/// Structural description of one layer. Conv layers are always 3x3, stride 1,
/// zero padding 1, so only channel counts are recorded.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out, 0, 0};
  }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0, 0}; }
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch) {
    return {LayerKind::conv2d, 0, 0, in_ch, out_ch};
  }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 0, 0}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Dense {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
};

struct Conv2d {
  static constexpr std::size_t kKernel = 3;
  Tensor weight;  // [out_ch, in_ch, 3, 3]
  Tensor bias;    // [out_ch]

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
};

struct Relu {};
struct Flatten {};

using Layer = std::variant<Dense, Conv2d, Relu, Flatten>;

inline LayerSpec spec_of(const Layer& layer) {
  if (const auto* d = std::get_if<Dense>(&layer)) return LayerSpec::dense(d->in_dim(), d->out_dim());
  if (const auto* c = std::get_if<Conv2d>(&layer)) {
    return LayerSpec::conv2d(c->in_channels(), c->out_channels());
  }
  if (std::holds_alternative<Relu>(layer)) return LayerSpec::relu();
  return LayerSpec::flatten();
}

/// Glorot-uniform weights, zero biases.
inline Layer make_layer(const LayerSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case LayerKind::dense: {
      if (spec.in_dim == 0 || spec.out_dim == 0) throw InvalidArgument("dense layer needs positive dims");
      Dense d{Tensor({spec.out_dim, spec.in_dim}), Tensor({spec.out_dim})};
      const double limit = std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
      for (double& w : d.weight.data()) w = rng.uniform(-limit, limit);
      return d;
    }
    case LayerKind::conv2d: {
      if (spec.in_channels == 0 || spec.out_channels == 0) {
        throw InvalidArgument("conv2d layer needs positive channel counts");
      }
      const std::size_t k2 = Conv2d::kKernel * Conv2d::kKernel;
      Conv2d c{Tensor({spec.out_channels, spec.in_channels, Conv2d::kKernel, Conv2d::kKernel}),
               Tensor({spec.out_channels})};
      const double fan_in = static_cast<double>(spec.in_channels * k2);
      const double fan_out = static_cast<double>(spec.out_channels * k2);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& w : c.weight.data()) w = rng.uniform(-limit, limit);
      return c;
    }
    case LayerKind::relu: return Relu{};
    case LayerKind::flatten: return Flatten{};
    case LayerKind::softmax: break;
  }
  throw InvalidArgument("softmax is an output head, not a stackable layer");
}

namespace detail {

inline Tensor dense_forward(const Dense& d, const Tensor& x) {
  const std::size_t batch = x.dim(0);
  const std::size_t in = d.in_dim();
  const std::size_t out = d.out_dim();
  Tensor y({batch, out});
  const double* w = d.weight.data().data();
  const double* b = d.bias.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x.data().data() + n * in;
    double* yr = y.data().data() + n * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

// Accumulates parameter gradients into gw/gb and returns the input gradient.
inline Tensor dense_backward(const Dense& d, const Tensor& x, const Tensor& dy, Tensor& gw,
                             Tensor& gb) {
  const std::size_t batch = x.dim(0);
  const std::size_t in = d.in_dim();
  const std::size_t out = d.out_dim();
  Tensor dx(x.shape());
  const double* w = d.weight.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xr = x.data().data() + n * in;
    const double* dyr = dy.data().data() + n * out;
    double* dxr = dx.data().data() + n * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      gb[o] += g;
      double* gwr = gw.data().data() + o * in;
      const double* wr = w + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  return dx;
}

inline Tensor conv_forward(const Conv2d& c, const Tensor& x) {
  const std::size_t batch = x.dim(0);
  const std::size_t cin = c.in_channels();
  const std::size_t cout = c.out_channels();
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  Tensor y({batch, cout, h, w});
  const double* wt = c.weight.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t oc = 0; oc < cout; ++oc) {
      double* yp = y.data().data() + ((n * cout + oc) * h) * w;
      std::fill(yp, yp + h * w, c.bias[oc]);
      for (std::size_t ic = 0; ic < cin; ++ic) {
        const double* xp = x.data().data() + ((n * cin + ic) * h) * w;
        const double* k = wt + (oc * cin + ic) * 9;
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t kr = 0; kr < 3; ++kr) {
            const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + kr) - 1;
            if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* xrow = xp + static_cast<std::size_t>(sr) * w;
            double* yrow = yp + r * w;
            for (std::size_t kc = 0; kc < 3; ++kc) {
              const double kv = k[kr * 3 + kc];
              // output column col reads input column col + kc - 1
              const std::size_t lo = kc == 0 ? 1 : 0;
              const std::size_t hi = kc == 2 ? w - 1 : w;
              for (std::size_t col = lo; col < hi; ++col) yrow[col] += kv * xrow[col + kc - 1];
            }
          }
        }
      }
    }
  }
  return y;
}

inline Tensor conv_backward(const Conv2d& c, const Tensor& x, const Tensor& dy, Tensor& gw,
                            Tensor& gb) {
  const std::size_t batch = x.dim(0);
  const std::size_t cin = c.in_channels();
  const std::size_t cout = c.out_channels();
  const std::size_t h = x.dim(2);
  const std::size_t w = x.dim(3);
  Tensor dx(x.shape());
  const double* wt = c.weight.data().data();
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t oc = 0; oc < cout; ++oc) {
      const double* dyp = dy.data().data() + ((n * cout + oc) * h) * w;
      double bsum = 0.0;
      for (std::size_t i = 0; i < h * w; ++i) bsum += dyp[i];
      gb[oc] += bsum;
      for (std::size_t ic = 0; ic < cin; ++ic) {
        const double* xp = x.data().data() + ((n * cin + ic) * h) * w;
        double* dxp = dx.data().data() + ((n * cin + ic) * h) * w;
        const double* k = wt + (oc * cin + ic) * 9;
        double* gk = gw.data().data() + (oc * cin + ic) * 9;
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t kr = 0; kr < 3; ++kr) {
            const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(r + kr) - 1;
            if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* xrow = xp + static_cast<std::size_t>(sr) * w;
            double* dxrow = dxp + static_cast<std::size_t>(sr) * w;
            const double* dyrow = dyp + r * w;
            for (std::size_t kc = 0; kc < 3; ++kc) {
              const double kv = k[kr * 3 + kc];
              const std::size_t lo = kc == 0 ? 1 : 0;
              const std::size_t hi = kc == 2 ? w - 1 : w;
              double acc = 0.0;
              for (std::size_t col = lo; col < hi; ++col) {
                acc += dyrow[col] * xrow[col + kc - 1];
                dxrow[col + kc - 1] += dyrow[col] * kv;
              }
              gk[kr * 3 + kc] += acc;
            }
          }
        }
      }
    }
  }
  return dx;
}

}  // namespace detail

/// Output shape of `layer` for an input of shape `in`, or ShapeError naming
/// the layer position.
inline Shape output_shape(const Layer& layer, const Shape& in, std::size_t index) {
  auto fail = [&](const std::string& what) {
    return ShapeError("layer " + std::to_string(index) + " (" + to_string(spec_of(layer).kind) +
                      "): " + what + ", got input " + shape_string(in));
  };
  if (const auto* d = std::get_if<Dense>(&layer)) {
    if (in.size() != 2 || in[1] != d->in_dim()) {
      throw fail("expects [batch x " + std::to_string(d->in_dim()) + "]");
    }
    return {in[0], d->out_dim()};
  }
  if (const auto* c = std::get_if<Conv2d>(&layer)) {
    if (in.size() != 4 || in[1] != c->in_channels()) {
      throw fail("expects [batch x " + std::to_string(c->in_channels()) + " x H x W]");
    }
    return {in[0], c->out_channels(), in[2], in[3]};
  }
  if (std::holds_alternative<Flatten>(layer)) {
    if (in.empty()) throw fail("expects a batch axis");
    return {in[0], shape_size(Shape(in.begin() + 1, in.end()))};
  }
  return in;
}

inline Tensor forward(const Layer& layer, const Tensor& x) {
  if (const auto* d = std::get_if<Dense>(&layer)) return detail::dense_forward(*d, x);
  if (const auto* c = std::get_if<Conv2d>(&layer)) return detail::conv_forward(*c, x);
  if (std::holds_alternative<Relu>(layer)) {
    Tensor y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
  }
  const std::size_t batch = x.dim(0);
  const std::size_t per = shape_size(Shape(x.shape().begin() + 1, x.shape().end()));
  return x.reshaped({batch, per});
}

/// Number of parameter tensors owned by the layer (0 or 2).
inline std::size_t param_count(const Layer& layer) {
  return std::holds_alternative<Dense>(layer) || std::holds_alternative<Conv2d>(layer) ? 2 : 0;
}

}  // namespace osrlab::nn
