#pragma once

#include <cstdlib>
#include <string>

#include "osrlab/error.hpp"
#include "osrlab/random.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::data {

inline constexpr int kMaxShift = 4;

struct Augmentation {
  enum class Kind { hflip, translate } kind = Kind::hflip;
  int dx = 0;  // positive moves content right
  int dy = 0;  // positive moves content down

  static Augmentation hflip() { return {Kind::hflip, 0, 0}; }
  static Augmentation translate(int dx, int dy) { return {Kind::translate, dx, dy}; }
};

/// Applies one augmentation to a [C x H x W] image. Translation fills the
/// uncovered border with zeros.
inline Tensor augment(const Tensor& img, const Augmentation& op) {
  if (img.rank() != 3) throw InvalidArgument("augment: expects a [C x H x W] image, got " + shape_string(img.shape()));
  const std::size_t ch = img.dim(0);
  const std::size_t h = img.dim(1);
  const std::size_t w = img.dim(2);
  Tensor out(img.shape());
  if (op.kind == Augmentation::Kind::hflip) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
          out[(c * h + r) * w + col] = img[(c * h + r) * w + (w - 1 - col)];
        }
      }
    }
    return out;
  }
  if (std::abs(op.dx) > kMaxShift || std::abs(op.dy) > kMaxShift) {
    throw InvalidArgument("augment: shift beyond +-" + std::to_string(kMaxShift) + " pixels");
  }
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      const auto sr = static_cast<std::ptrdiff_t>(r) - op.dy;
      if (sr < 0 || sr >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t col = 0; col < w; ++col) {
        const auto sc = static_cast<std::ptrdiff_t>(col) - op.dx;
        if (sc < 0 || sc >= static_cast<std::ptrdiff_t>(w)) continue;
        out[(c * h + r) * w + col] = img[(c * h + static_cast<std::size_t>(sr)) * w + static_cast<std::size_t>(sc)];
      }
    }
  }
  return out;
}

/// Random training-time augmentation of a [B x C x H x W] batch: each image
/// is flipped with probability 1/2 (if enabled) and shifted by up to
/// `max_shift` pixels per axis.
inline void augment_batch(Tensor& batch, Rng& rng, bool hflip, int max_shift) {
  if (batch.rank() != 4) return;
  const Shape img_shape(batch.shape().begin() + 1, batch.shape().end());
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    auto row = batch.row(i);
    Tensor img(img_shape, std::vector<double>(row.begin(), row.end()));
    if (hflip && rng.below(2) == 1) img = augment(img, Augmentation::hflip());
    if (max_shift > 0) {
      const auto span = static_cast<std::uint64_t>(2 * max_shift + 1);
      const int dx = static_cast<int>(rng.below(span)) - max_shift;
      const int dy = static_cast<int>(rng.below(span)) - max_shift;
      img = augment(img, Augmentation::translate(dx, dy));
    }
    std::copy(img.data().begin(), img.data().end(), row.begin());
  }
}

}  // namespace osrlab::data
