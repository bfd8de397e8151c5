#pragma once

#include "atlab/tensor.hpp"

#include <string>

namespace atlab {

// Big-endian IDX containers. Images are accepted as unsigned-byte files
// (type 0x08, pixels scaled to [0,1] by /255) or float64 files (type 0x0E,
// raw values); 3-D [n,rows,cols] files load as single-channel [n,1,rows,cols],
// 4-D files as [n,c,rows,cols]. Labels are 1-D unsigned-byte (magic 0x801).
Tensor read_idx_images(const std::string& path);
std::vector<int> read_idx_labels(const std::string& path);

// num_classes_hint of 0 infers max(label)+1.
LabeledDataset load_idx(const std::string& image_path, const std::string& label_path,
                        int num_classes_hint = 0);

// Single-channel tensors are written as 3-D files, multi-channel as 4-D.
void write_idx_images_u8(const std::string& path, const Tensor& images);
void write_idx_images_f64(const std::string& path, const Tensor& images);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

// CIFAR binary: 3073-byte records (1 label byte + 3072 CHW pixel bytes).
LabeledDataset load_cifar_binary(const std::vector<std::string>& paths);

}  // namespace atlab
