#pragma once

#include "atlab/config.hpp"

#include <functional>

namespace atlab {

struct TrainedModel {
  ModelEntry entry;
  NetworkModel model;
  TrainingHistory history;  // empty for epoch snapshots
};

struct Roster {
  std::vector<TrainedModel> models;

  const TrainedModel& get(const std::string& id) const;
  const NetworkModel& model(const std::string& id) const { return get(id).model; }
  bool has(const std::string& id) const;
  std::vector<std::string> source_ids() const;
  std::vector<std::string> target_ids() const;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains the configured roster. same-init entries copy the parent's initial
// parameters before any training; epoch snapshots are captured during the
// parent's own fit. Training data ordering and dropout depend only on each
// entry's seed.
Roster prepare_roster(const std::vector<ModelEntry>& entries, const LabeledDataset& train,
                      const LabeledDataset& test, const OptimizerConfig& train_cfg,
                      const ProgressFn& progress = nullptr);

// Static, seeded augmentation expansion (non-paper extension; off by default).
LabeledDataset augment_dataset(const LabeledDataset& data, bool hflip, int crop_pad,
                               std::uint64_t seed);

// Loads or generates the configured dataset pair (train, test).
std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetConfig& cfg);

}  // namespace atlab
