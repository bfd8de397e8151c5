#pragma once

#include "atlab/common.hpp"

#include <initializer_list>
#include <numeric>
#include <vector>

namespace atlab {

// Dense n-dimensional array: shape + flat row-major doubles backed by Eigen.
struct Tensor {
  std::vector<Index> shape;
  ArrayX data;

  Tensor() = default;
  Tensor(std::vector<Index> s, ArrayX d) : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<Index> s) {
    Tensor t;
    t.shape = std::move(s);
    t.data = ArrayX::Zero(count(t.shape));
    return t;
  }

  static Index count(const std::vector<Index>& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
  }

  Index size() const { return data.size(); }
  Index dim(std::size_t i) const { return shape.at(i); }
  Index ndim() const { return static_cast<Index>(shape.size()); }

  // Number of leading-axis items (batch size for [n, ...] tensors).
  Index rows() const { return shape.empty() ? 0 : shape[0]; }
  // Flat size of everything after the leading axis.
  Index row_size() const { return rows() == 0 ? 0 : size() / rows(); }

  bool shape_matches(const Tensor& other) const { return shape == other.shape; }

  // 2-D row-major view [r, c]; r*c must equal size().
  MapMatR mat(Index r, Index c) { return MapMatR(data.data(), r, c); }
  MapConstMatR mat(Index r, Index c) const { return MapConstMatR(data.data(), r, c); }
  // View as [rows(), row_size()].
  MapMatR as_batch() { return mat(rows(), row_size()); }
  MapConstMatR as_batch() const { return mat(rows(), row_size()); }

  // i-th leading-axis slice as a flat vector view.
  Eigen::Map<ArrayX> row(Index i) {
    return Eigen::Map<ArrayX>(data.data() + i * row_size(), row_size());
  }
  Eigen::Map<const ArrayX> row(Index i) const {
    return Eigen::Map<const ArrayX>(data.data() + i * row_size(), row_size());
  }

  bool all_finite() const { return data.isFinite().all(); }

  void require_finite(const char* where) const {
    if (!all_finite()) throw NumericalError(std::string("non-finite values in ") + where);
  }
};

// Labeled image set: images [n, ...] with pixels in [0,1], integer labels.
struct LabeledDataset {
  Tensor images;
  std::vector<int> labels;
  int num_classes = 0;

  Index size() const { return images.rows(); }

  std::vector<Index> item_shape() const {
    return {images.shape.begin() + 1, images.shape.end()};
  }

  void validate() const {
    if (images.rows() != static_cast<Index>(labels.size()))
      throw FormatError("dataset image/label count mismatch");
    for (int y : labels)
      if (y < 0 || y >= num_classes) throw FormatError("dataset label out of range");
  }

  // Sub-dataset by leading-axis indices.
  LabeledDataset select(const std::vector<Index>& idx) const;
};

}  // namespace atlab
