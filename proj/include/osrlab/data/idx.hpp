#pragma once

// IDX (MNIST) files. All integers are big-endian.
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes
// Pixels are scaled by 1/255 on load, so byte 255 reads as exactly 1.0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "osrlab/data/dataset.hpp"
#include "osrlab/error.hpp"

namespace osrlab::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  const unsigned char* take(std::size_t n) {
    need(n);
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(path_ + ": unexpected EOF");
  }

  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

}  // namespace detail

/// Loads a paired IDX image/label file set as a single-channel image
/// dataset. Class names default to "0".."max label".
inline LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                               std::vector<std::string> class_names = {}, const std::string& origin = "idx") {
  const auto image_bytes = detail::read_bytes(images_path);
  const auto label_bytes = detail::read_bytes(labels_path);
  detail::ByteReader images(image_bytes, images_path);
  detail::ByteReader labels(label_bytes, labels_path);
  if (images.u32() != kIdxImageMagic) throw FormatError(images_path + ": not an IDX file");
  if (labels.u32() != kIdxLabelMagic) throw FormatError(labels_path + ": not an IDX file");
  const std::uint32_t count = images.u32();
  const std::uint32_t rows = images.u32();
  const std::uint32_t cols = images.u32();
  const std::uint32_t label_count = labels.u32();
  if (count != label_count) throw FormatError("label/image count differ");
  if (rows == 0 || cols == 0) throw FormatError(images_path + ": zero image dimension");
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  const unsigned char* label_data = labels.take(count);
  const unsigned char* pixel_data = images.take(pixels * count);

  if (class_names.empty()) {
    const unsigned char max_label = count ? *std::max_element(label_data, label_data + count) : 0;
    class_names = numeric_class_names(static_cast<std::size_t>(max_label) + 1);
  }
  LabeledDataset ds(DataKind::image, {1, rows, cols}, std::move(class_names));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<double> px(pixels);
    for (std::size_t k = 0; k < pixels; ++k) px[k] = pixel_data[i * pixels + k] / 255.0;
    ds.add(Tensor({1, rows, cols}, std::move(px)), label_data[i], origin);
  }
  return ds;
}

/// Writes a single-channel image dataset as an IDX image/label pair. Values
/// are mapped back to bytes with round(v * 255).
inline void write_idx(const LabeledDataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.kind() != DataKind::image || ds.sample_shape()[0] != 1) {
    throw InvalidArgument("write_idx: only single-channel image datasets are representable");
  }
  const auto rows = static_cast<std::uint32_t>(ds.sample_shape()[1]);
  const auto cols = static_cast<std::uint32_t>(ds.sample_shape()[2]);
  std::vector<unsigned char> img;
  std::vector<unsigned char> lab;
  detail::put_u32(img, kIdxImageMagic);
  detail::put_u32(img, static_cast<std::uint32_t>(ds.size()));
  detail::put_u32(img, rows);
  detail::put_u32(img, cols);
  detail::put_u32(lab, kIdxLabelMagic);
  detail::put_u32(lab, static_cast<std::uint32_t>(ds.size()));
  for (const auto& it : ds.items()) {
    if (it.class_id > 255) throw InvalidArgument("write_idx: label exceeds one byte");
    lab.push_back(static_cast<unsigned char>(it.class_id));
    for (double v : it.sample.data()) {
      img.push_back(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  for (const auto& [path, bytes] : {std::pair{images_path, &img}, std::pair{labels_path, &lab}}) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes->data()), static_cast<std::streamsize>(bytes->size()));
    if (!out) throw Error("cannot write '" + path + "'");
  }
}

}  // namespace osrlab::data
