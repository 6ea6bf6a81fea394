#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "osrlab/error.hpp"
#include "osrlab/tensor.hpp"

namespace osrlab::data {

enum class DataKind { image, vector };

inline std::string to_string(DataKind k) { return k == DataKind::image ? "image" : "vector"; }

inline DataKind data_kind_from_string(const std::string& s) {
  if (s == "image") return DataKind::image;
  if (s == "vector") return DataKind::vector;
  throw FormatError("unknown dataset kind '" + s + "'");
}

struct Item {
  Tensor sample;
  std::size_t class_id = 0;
  std::string origin;  // name of the source dataset
};

/// Samples of one shape with class ids indexing `class_names`. Images are
/// [C x H x W], vectors [d].
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(DataKind kind, Shape sample_shape, std::vector<std::string> class_names)
      : kind_(kind), sample_shape_(std::move(sample_shape)), class_names_(std::move(class_names)) {
    if (kind_ == DataKind::image && sample_shape_.size() != 3) {
      throw InvalidArgument("image datasets need [C x H x W] samples, got " + shape_string(sample_shape_));
    }
    if (kind_ == DataKind::vector && sample_shape_.size() != 1) {
      throw InvalidArgument("vector datasets need [d] samples, got " + shape_string(sample_shape_));
    }
  }

  void add(Tensor sample, std::size_t class_id, std::string origin) {
    if (sample.shape() != sample_shape_) {
      throw ShapeError("sample shape " + shape_string(sample.shape()) + " differs from dataset shape " +
                       shape_string(sample_shape_));
    }
    if (class_id >= class_names_.size()) {
      throw InvalidArgument("class id " + std::to_string(class_id) + " has no declared class name");
    }
    items_.push_back({std::move(sample), class_id, std::move(origin)});
  }

  DataKind kind() const { return kind_; }
  const Shape& sample_shape() const { return sample_shape_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<Item>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Item& operator[](std::size_t i) const { return items_[i]; }

  std::size_t sample_dim() const { return shape_size(sample_shape_); }

  /// All samples stacked into one [N x sample_shape] batch.
  Tensor stacked() const {
    Shape shape = sample_shape_;
    shape.insert(shape.begin(), items_.size());
    std::vector<double> data;
    data.reserve(items_.size() * sample_dim());
    for (const auto& it : items_) data.insert(data.end(), it.sample.storage().begin(), it.sample.storage().end());
    return Tensor(std::move(shape), std::move(data));
  }

  std::vector<std::size_t> labels() const {
    std::vector<std::size_t> out;
    out.reserve(items_.size());
    for (const auto& it : items_) out.push_back(it.class_id);
    return out;
  }

  /// Items with the given indices, same classes and metadata.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const {
    LabeledDataset out(kind_, sample_shape_, class_names_);
    out.items_.reserve(indices.size());
    for (std::size_t i : indices) out.items_.push_back(items_.at(i));
    return out;
  }

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.kind_ != b.kind_ || a.sample_shape_ != b.sample_shape_ || a.class_names_ != b.class_names_ ||
        a.items_.size() != b.items_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < a.items_.size(); ++i) {
      const auto& x = a.items_[i];
      const auto& y = b.items_[i];
      if (x.class_id != y.class_id || x.origin != y.origin || !(x.sample == y.sample)) return false;
    }
    return true;
  }

 private:
  DataKind kind_ = DataKind::vector;
  Shape sample_shape_;
  std::vector<std::string> class_names_;
  std::vector<Item> items_;
};

/// Class names "0".."n-1".
inline std::vector<std::string> numeric_class_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace osrlab::data
