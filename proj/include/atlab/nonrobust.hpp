#pragma once

#include "atlab/attack.hpp"
#include "atlab/train.hpp"

#include <string>

namespace atlab {

struct NonRobustBuildSpec {
  std::string f1_id = "f1", f2_id = "f2";
  AttackSpec attack;      // NTargeted; targets are drawn per image inside the build
  int replication = 1;    // adversarial examples per source image
  std::uint64_t seed = 0;
  // Failed joint attacks are still included (the whole set is relabeled); this
  // flag drops items whose per-model attack missed its target, for ablations.
  bool keep_failed = true;
};

struct NonRobustItem {
  Index source_index = -1;
  int y = 0;          // true label of the source image
  int y1_target = 0;  // target drawn for F1
  int y2_target = 0;  // target drawn for F2
  bool f1_success = false;
  bool f2_success = false;
};

struct NonRobustDataset {
  LabeledDataset data;        // adversarial images with Y1 or Y2 labels
  std::string variant;        // "Y1" or "Y2"
  std::string f1_id, f2_id;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::vector<NonRobustItem> provenance;
};

struct NonRobustStats {
  Index n_items = 0;
  Index f1_hits = 0;     // F1(x') == Y1
  Index f2_hits = 0;     // F2(x') == Y2
  Index joint_hits = 0;  // both
  Index y1_equals_y2 = 0;

  double f1_rate() const { return n_items ? static_cast<double>(f1_hits) / n_items : 0.0; }
  double f2_rate() const { return n_items ? static_cast<double>(f2_hits) / n_items : 0.0; }
  double joint_rate() const { return n_items ? static_cast<double>(joint_hits) / n_items : 0.0; }
};

struct NonRobustBuild {
  NonRobustDataset d1;  // (X', Y1)
  NonRobustDataset d2;  // (X', Y2): identical images, different labels
  NonRobustStats stats;
};

// One N-targeted attack per (image, replication) with independently sampled
// target pairs; both datasets share the image tensors and differ in labels.
NonRobustBuild build_nonrobust_sets(const LabeledDataset& trainset, const NetworkModel& f1,
                                    const NetworkModel& f2, const NonRobustBuildSpec& spec,
                                    int threads = 0);

struct RetrainResult {
  double clean_test_accuracy = 0.0;  // final epoch, no early stopping
  double train_accuracy = 0.0;       // on the non-robust set itself
  TrainingHistory history;
};

RetrainResult retrain_and_eval(const NonRobustDataset& nonrobust, const std::string& arch_preset,
                               const OptimizerConfig& cfg, const LabeledDataset& clean_test);

struct SuccessBreakdown {
  double f1_rate = 0.0, f2_rate = 0.0, joint_rate = 0.0;
};

SuccessBreakdown success_breakdown(const NonRobustStats& stats);

// Recount the rates from stored provenance flags (must equal the build stats).
NonRobustStats recount_stats(const std::vector<NonRobustItem>& provenance);

// File name stem "nonrobust_<f1>_<f2>_<variant>_eps<e>_seed<s>"; persistence is
// an IDX float64 image file, an IDX label file and a JSON provenance sidecar.
std::string nonrobust_basename(const NonRobustDataset& ds);
void save_nonrobust_dataset(const NonRobustDataset& ds, const std::string& dir);
NonRobustDataset load_nonrobust_dataset(const std::string& dir, const std::string& basename);

// Re-verifies label provenance and the l2 bound of every stored image against
// its source; throws NumericalError on violation.
void verify_nonrobust_dataset(const NonRobustDataset& ds, const LabeledDataset& trainset);

}  // namespace atlab
