#include "atlab/synthetic.hpp"

#include <random>

namespace atlab {

std::vector<ArrayX> synthetic_class_means(const SyntheticSpec& spec) {
  const Index dim = Tensor::count(spec.shape);
  std::mt19937_64 rng(mix_seed(spec.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ArrayX> means;
  means.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int c = 0; c < spec.num_classes; ++c) {
    ArrayX dir(dim);
    for (Index i = 0; i < dim; ++i) dir[i] = normal(rng);
    dir /= std::sqrt((dir * dir).sum());
    ArrayX mean = 0.5 + spec.mean_radius * dir;
    means.push_back(mean.min(1.0).max(0.0));
  }
  return means;
}

namespace {

LabeledDataset draw_split(const SyntheticSpec& spec, const std::vector<ArrayX>& means,
                          Index count, std::uint64_t stream) {
  const Index dim = Tensor::count(spec.shape);
  const int C = spec.num_classes;
  ArrayX center = ArrayX::Zero(dim);
  for (const auto& m : means) center += m;
  center /= static_cast<double>(C);

  LabeledDataset ds;
  ds.num_classes = C;
  std::vector<Index> shape = spec.shape;
  shape.insert(shape.begin(), count);
  ds.images = Tensor::zeros(shape);
  ds.labels.resize(static_cast<std::size_t>(count));

  std::mt19937_64 rng(mix_seed(spec.seed, stream));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < count; ++i) {
    const int y = static_cast<int>(i % C);  // class-balanced
    ds.labels[static_cast<std::size_t>(i)] = y;
    ArrayX x = means[static_cast<std::size_t>(y)];
    if (spec.class_mix > 0.0) {
      for (int c = 0; c < C; ++c) {
        const double g = spec.class_mix * normal(rng);
        x += g * (means[static_cast<std::size_t>(c)] - center);
      }
    }
    if (spec.noise_scale > 0.0) {
      for (Index p = 0; p < dim; ++p) x[p] += spec.noise_scale * normal(rng);
    }
    ds.images.row(i) = x.min(1.0).max(0.0);
  }
  return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("synthetic: need at least 2 classes");
  if (spec.train_count < 1 || spec.test_count < 1)
    throw std::invalid_argument("synthetic: counts must be positive");
  const auto means = synthetic_class_means(spec);
  for (std::size_t a = 0; a < means.size(); ++a)
    for (std::size_t b = a + 1; b < means.size(); ++b)
      if ((means[a] - means[b]).abs().maxCoeff() == 0.0)
        throw NumericalError("synthetic cluster means collided; change the seed");
  return {draw_split(spec, means, spec.train_count, 1),
          draw_split(spec, means, spec.test_count, 2)};
}

}  // namespace atlab
