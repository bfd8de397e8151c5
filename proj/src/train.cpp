#include "atlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace atlab {

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (lr_decay_factor <= 0.0 || lr_decay_factor > 1.0)
    throw std::invalid_argument("lr_decay_factor must be in (0,1]");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

TrainingHistory fit(NetworkModel& model, const LabeledDataset& train, const OptimizerConfig& cfg,
                    const LabeledDataset* eval_set, const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  const Index n = train.size();
  if (n == 0) throw std::invalid_argument("fit: empty dataset");
  if (cfg.batch_size > n) throw std::invalid_argument("fit: batch_size exceeds dataset size");

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0));
  std::vector<LayerParams> velocity(model.params().size());
  for (std::size_t i = 0; i < velocity.size(); ++i) {
    velocity[i].weight = ArrayX::Zero(model.params()[i].weight.size());
    velocity[i].bias = ArrayX::Zero(model.params()[i].bias.size());
  }

  const Index item = train.images.row_size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  TrainingHistory history;
  double lr = cfg.learning_rate;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (std::find(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(), epoch) !=
        cfg.lr_decay_epochs.end())
      lr *= cfg.lr_decay_factor;

    std::shuffle(order.begin(), order.end(), shuffle_rng);
    model.set_mode(Mode::Train);
    model.seed_rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));

    double loss_sum = 0.0;
    Index batches = 0;
    Tensor batch;
    std::vector<int> labels;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index count = std::min<Index>(cfg.batch_size, n - start);
      batch.shape = train.images.shape;
      batch.shape[0] = count;
      batch.data.resize(count * item);
      labels.resize(static_cast<std::size_t>(count));
      for (Index i = 0; i < count; ++i) {
        const Index src = order[static_cast<std::size_t>(start + i)];
        batch.data.segment(i * item, item) = train.images.data.segment(src * item, item);
        labels[static_cast<std::size_t>(i)] = train.labels[static_cast<std::size_t>(src)];
      }
      const auto lg = loss_and_grads(model, batch, labels, Wrt::Params);
      loss_sum += lg.loss;
      ++batches;
      for (std::size_t li = 0; li < velocity.size(); ++li) {
        auto& p = model.params()[li];
        auto& v = velocity[li];
        const auto& g = lg.grads.params[li];
        if (p.weight.size()) {
          v.weight = cfg.momentum * v.weight + g.weight + cfg.weight_decay * p.weight;
          p.weight -= lr * v.weight;
        }
        if (p.bias.size()) {
          v.bias = cfg.momentum * v.bias + g.bias + cfg.weight_decay * p.bias;
          p.bias -= lr * v.bias;
        }
      }
    }

    model.set_mode(Mode::Eval);
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(batches);
    stats.train_accuracy = accuracy(model, train);
    stats.test_accuracy =
        eval_set ? accuracy(model, *eval_set) : std::numeric_limits<double>::quiet_NaN();
    history.push_back(stats);
    if (on_epoch) on_epoch(epoch, model, stats);
  }
  model.set_mode(Mode::Eval);
  return history;
}

}  // namespace atlab
