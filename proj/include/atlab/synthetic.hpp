#pragma once

#include "atlab/tensor.hpp"

namespace atlab {

// Seeded Gaussian class clusters in pixel space, the zero-download stand-in
// for Fashion-MNIST. Class means sit at 0.5 + mean_radius * u_c for random
// unit directions u_c, so pairwise mean distance is about mean_radius*sqrt(2).
// Samples add isotropic pixel noise plus a shared component along the class
// mean directions (class_mix), which spreads per-sample margins and keeps the
// attack sweeps gradual instead of step-like.
struct SyntheticSpec {
  int num_classes = 10;
  std::vector<Index> shape = {1, 16, 16};
  double mean_radius = 0.9;
  double noise_scale = 0.05;
  double class_mix = 0.35;
  Index train_count = 4000;
  Index test_count = 1000;
  std::uint64_t seed = 0;
};

// Class means, clipped to [0,1]; pairwise distinct for any seed.
std::vector<ArrayX> synthetic_class_means(const SyntheticSpec& spec);

// Class-balanced seeded draws; all pixels clipped to [0,1].
std::pair<LabeledDataset, LabeledDataset> generate_synthetic(const SyntheticSpec& spec);

}  // namespace atlab
