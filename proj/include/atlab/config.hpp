#pragma once

#include "atlab/attack.hpp"
#include "atlab/synthetic.hpp"
#include "atlab/train.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace atlab {

// Flat key=value file with dotted section prefixes and '#' comments. Keys keep
// file order; duplicate keys are an error.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  Index get_index(const std::string& key, Index fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  // Distinct <id> segments of keys "prefix.<id>.*", in file order.
  std::vector<std::string> section_ids(const std::string& prefix) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string canonical_text() const;  // normalized "key = value" lines, for hashing

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::string> index_;
};

enum class ModelRole { Source, Target, Both };

struct ModelLineage {
  enum class Kind { Fresh, SameInitAs, EpochSnapshotOf } kind = Kind::Fresh;
  std::string parent;  // referenced model id
  int epoch = 0;       // snapshot epoch
};

ModelLineage parse_lineage(const std::string& text);
std::string lineage_to_string(const ModelLineage& l);

struct ModelEntry {
  std::string id;
  std::string preset = "FC-2";
  std::uint64_t seed = 0;
  ModelRole role = ModelRole::Both;
  ModelLineage lineage;
};

struct DatasetConfig {
  enum class Source { Synthetic, Idx, Cifar } source = Source::Synthetic;
  std::string id = "synthetic";
  SyntheticSpec synthetic;
  std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;
  std::vector<std::string> cifar_train, cifar_test;
  // Non-paper augmentation toggles; off by default and not used by the
  // shipped configurations.
  bool augment_hflip = false;
  int augment_crop_pad = 0;
};

struct AttackSweepEntry {
  std::string id;
  AttackFamily family = AttackFamily::PGD;
  Objective::Kind objective = Objective::Kind::NonTargeted;
  std::vector<double> epsilons;  // one report per value
  int steps = 0;
  double step_size = 0.0;
  double momentum_decay = 1.0;
  std::uint64_t seed = 0;
};

struct NonRobustConfig {
  bool enabled = false;
  std::string f1, f2;
  double epsilon = 2.0;
  int steps = 100;
  double step_size = 0.1;
  int replication = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> retrain_presets = {"Conv-2", "FC-2"};
  OptimizerConfig retrain;
  bool run_random_control = true;
};

struct EnsembleConfig {
  bool enabled = false;
  std::string source, extra, heldout;
  double epsilon = 2.0;
  int steps = 10;
  Index sample_n = 2000;
  std::uint64_t seed = 0;
};

struct GridConfig {
  std::vector<Index> image_indices;
  Index half_extent = 30;
  Index resolution = 61;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<ModelEntry> roster;
  OptimizerConfig train;
  std::vector<AttackSweepEntry> attacks;
  Index eval_sample_n = 2000;
  Index eval_dist_images = 1000;
  std::uint64_t eval_seed = 0;
  bool dist_pool_roster = false;  // false: per-pair correct pool (Eq. 1 reading)
  bool dist_enabled = true;
  double dist_cap = 2.0;
  double dist_tol = 1e-4;
  GridConfig grids;
  NonRobustConfig nonrobust;
  EnsembleConfig ensemble;
  std::string output_dir = "out";
  std::string config_hash;  // canonical-text hash, filled by the parser

  void validate() const;
};

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace atlab
