#pragma once

#include "atlab/network.hpp"

#include <functional>

namespace atlab {

// SGD with momentum, weight decay and step learning-rate decay. Defaults are
// the Fashion-MNIST training regime.
struct OptimizerConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::vector<int> lr_decay_epochs = {20};  // 1-based epoch at which lr *= factor
  double lr_decay_factor = 0.1;
  int epochs = 40;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;          // 1-based
  double mean_loss = 0.0; // mean over minibatch losses
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN when no eval set was given
};

using TrainingHistory = std::vector<EpochStats>;

// Called after each epoch; used for epoch snapshots and progress logging.
using EpochCallback = std::function<void(int epoch, const NetworkModel&, const EpochStats&)>;

// In-place minibatch SGD. Shuffling and dropout are driven by cfg.seed, so a
// fixed seed reproduces the exact parameter trajectory.
TrainingHistory fit(NetworkModel& model, const LabeledDataset& train, const OptimizerConfig& cfg,
                    const LabeledDataset* eval_set = nullptr,
                    const EpochCallback& on_epoch = nullptr);

}  // namespace atlab
