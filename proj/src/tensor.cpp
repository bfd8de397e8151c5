#include "atlab/tensor.hpp"

namespace atlab {

LabeledDataset LabeledDataset::select(const std::vector<Index>& idx) const {
  LabeledDataset out;
  out.num_classes = num_classes;
  out.images.shape = images.shape;
  out.images.shape[0] = static_cast<Index>(idx.size());
  const Index item = images.row_size();
  out.images.data.resize(static_cast<Index>(idx.size()) * item);
  out.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.images.data.segment(static_cast<Index>(i) * item, item) =
        images.data.segment(idx[i] * item, item);
    out.labels[i] = labels[static_cast<std::size_t>(idx[i])];
  }
  return out;
}

}  // namespace atlab
