#pragma once

// Shared oracles and fixtures. Everything here is implementation-independent
// of the library paths it checks: reference forward passes, finite-difference
// gradients and line scans are written directly against the math.

#include "atlab/network.hpp"
#include "atlab/synthetic.hpp"
#include "atlab/train.hpp"

#include <cmath>
#include <random>

namespace testutil {

using namespace atlab;

inline Tensor make_tensor(std::vector<Index> shape, std::vector<double> values) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.data[i] = values[static_cast<std::size_t>(i)];
  return t;
}

inline Tensor random_tensor(std::vector<Index> shape, std::uint64_t seed, double lo = 0.05,
                            double hi = 0.95) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t.data[i] = unif(rng);
  return t;
}

// Central finite-difference gradient of the mean loss w.r.t. the batch.
inline Tensor fd_input_gradient(const NetworkModel& model, const Tensor& batch,
                                const std::vector<int>& labels, double h = 1e-5) {
  Tensor grad = Tensor::zeros(batch.shape);
  Tensor probe = batch;
  for (Index i = 0; i < batch.size(); ++i) {
    probe.data[i] = batch.data[i] + h;
    const double up = mean_loss(model, probe, labels);
    probe.data[i] = batch.data[i] - h;
    const double down = mean_loss(model, probe, labels);
    probe.data[i] = batch.data[i];
    grad.data[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Central finite differences over every parameter coordinate.
inline std::vector<LayerParams> fd_param_gradients(NetworkModel& model, const Tensor& batch,
                                                   const std::vector<int>& labels,
                                                   double h = 1e-5) {
  std::vector<LayerParams> grads(model.params().size());
  for (std::size_t li = 0; li < model.params().size(); ++li) {
    auto& p = model.params()[li];
    grads[li].weight = ArrayX::Zero(p.weight.size());
    grads[li].bias = ArrayX::Zero(p.bias.size());
    for (auto [arr, out] : {std::pair{&p.weight, &grads[li].weight},
                            std::pair{&p.bias, &grads[li].bias}}) {
      for (Index i = 0; i < arr->size(); ++i) {
        const double keep = (*arr)[i];
        (*arr)[i] = keep + h;
        const double up = mean_loss(model, batch, labels);
        (*arr)[i] = keep - h;
        const double down = mean_loss(model, batch, labels);
        (*arr)[i] = keep;
        (*out)[i] = (up - down) / (2.0 * h);
      }
    }
  }
  return grads;
}

inline double max_rel_err(const ArrayX& got, const ArrayX& want, double floor = 1e-3) {
  double worst = 0.0;
  for (Index i = 0; i < got.size(); ++i) {
    const double denom = std::max({floor, std::abs(got[i]), std::abs(want[i])});
    worst = std::max(worst, std::abs(got[i] - want[i]) / denom);
  }
  return worst;
}

// Dense+ReLU reference forward written against the math, not the library.
inline ArrayX reference_dense_forward(const std::vector<LayerSpec>& layers,
                                      const std::vector<LayerParams>& params, ArrayX x) {
  for (std::size_t li = 0; li < layers.size(); ++li) {
    if (const auto* d = std::get_if<DenseSpec>(&layers[li])) {
      ArrayX out = ArrayX::Zero(d->out);
      for (Index o = 0; o < d->out; ++o) {
        double acc = params[li].bias[o];
        for (Index i = 0; i < d->in; ++i) acc += x[i] * params[li].weight[i * d->out + o];
        out[o] = acc;
      }
      x = out;
    } else if (std::holds_alternative<ReluSpec>(layers[li])) {
      x = x.max(0.0);
    }
  }
  return x;
}

// Linear softmax model: logits = W x + b, built from explicit row weights.
// rows[c] has one weight vector per class over the flat input.
inline NetworkModel linear_model(const std::vector<std::vector<double>>& rows,
                                 const std::vector<double>& bias) {
  const Index in = static_cast<Index>(rows[0].size());
  const Index classes = static_cast<Index>(rows.size());
  NetworkModel m({DenseSpec{in, classes}}, {in}, static_cast<int>(classes));
  for (Index c = 0; c < classes; ++c) {
    for (Index i = 0; i < in; ++i)
      m.params()[0].weight[i * classes + c] = rows[static_cast<std::size_t>(c)]
                                                  [static_cast<std::size_t>(i)];
    m.params()[0].bias[c] = bias[static_cast<std::size_t>(c)];
  }
  return m;
}

// Small well-separated two-cluster dataset for quick training checks.
inline LabeledDataset blob_dataset(Index n, Index dim, double separation, double noise,
                                   std::uint64_t seed, int classes = 2) {
  LabeledDataset ds;
  ds.num_classes = classes;
  ds.images = Tensor::zeros({n, dim});
  ds.labels.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ArrayX> means;
  for (int c = 0; c < classes; ++c) {
    ArrayX m(dim);
    for (Index i = 0; i < dim; ++i) m[i] = normal(rng);
    m = 0.5 + separation * m / std::sqrt((m * m).sum());
    means.push_back(m.min(1.0).max(0.0));
  }
  for (Index i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % classes);
    ds.labels[static_cast<std::size_t>(i)] = y;
    for (Index p = 0; p < dim; ++p)
      ds.images.data[i * dim + p] = std::clamp(
          means[static_cast<std::size_t>(y)][p] + noise * normal(rng), 0.0, 1.0);
  }
  return ds;
}

// Trained small-model fixture shared by the attack/transfer tests: fast to
// train and has genuinely curved boundaries.
struct TrainedPair {
  LabeledDataset train, test;
  NetworkModel f1, f2;
};

inline TrainedPair trained_pair(std::uint64_t seed = 9, Index dim_side = 8) {
  SyntheticSpec spec;
  spec.num_classes = 4;
  spec.shape = {1, dim_side, dim_side};
  spec.mean_radius = 0.7;
  spec.noise_scale = 0.06;
  spec.class_mix = 0.4;
  spec.train_count = 600;
  spec.test_count = 400;
  spec.seed = seed;
  TrainedPair tp;
  auto pair = generate_synthetic(spec);
  tp.train = std::move(pair.first);
  tp.test = std::move(pair.second);
  OptimizerConfig cfg;
  cfg.epochs = 8;
  cfg.batch_size = 64;
  cfg.lr_decay_epochs = {6};
  tp.f1 = build_architecture("FC-2", tp.train.item_shape(), spec.num_classes, seed + 1);
  cfg.seed = seed + 1;
  fit(tp.f1, tp.train, cfg);
  tp.f2 = build_architecture("FC-2", tp.train.item_shape(), spec.num_classes, seed + 2);
  cfg.seed = seed + 2;
  fit(tp.f2, tp.train, cfg);
  return tp;
}

}  // namespace testutil
