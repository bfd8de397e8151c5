#pragma once

#include "atlab/boundary.hpp"
#include "atlab/nonrobust.hpp"
#include "atlab/roster.hpp"
#include "atlab/transfer.hpp"

namespace atlab {

// Paper-style four-column comparison of a vanilla targeted attack on the
// source model against the two-model ensemble attack, both evaluated on a
// held-out model with identical per-image targets.
struct EnsembleComparison {
  struct Row {
    Index f1_unfooled = 0;   // source not fooled
    Index f2_unfooled = 0;   // source fooled, held-out predicts y
    Index different = 0;     // held-out predicts neither y nor y1
    Index same = 0;          // held-out predicts y1
  };
  Index n_attacked = 0;
  Row vanilla, ensemble;
};

EnsembleComparison ensemble_compare(const NetworkModel& source, const NetworkModel& extra,
                                    const NetworkModel& heldout, const LabeledDataset& data,
                                    double epsilon, int steps, Index sample_n, std::uint64_t seed,
                                    int threads = 0);

std::string ensemble_comparison_csv(const EnsembleComparison& cmp);

// Images (as a dataset) correctly classified by all given models, drawn
// seeded without replacement up to max_n.
LabeledDataset correctly_classified_pool(const std::vector<const NetworkModel*>& models,
                                         const LabeledDataset& data, Index max_n,
                                         std::uint64_t seed);

struct TaskRecord {
  std::string name;
  std::string status;  // "ok" | "error"
  std::string error;
};

struct ExperimentResult {
  std::string output_dir;
  std::vector<TaskRecord> tasks;
  std::vector<TransferReport> reports;
  bool all_ok() const;
};

// Full bundle: roster training + checkpoints, attack sweeps with per-pair
// transfer reports, Dist tables, boundary grids, the non-robust pipeline and
// the ensemble comparison, all tied together by a manifest with content
// hashes. Task failures are recorded and do not abort the bundle.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 0,
                                const ProgressFn& progress = nullptr);

}  // namespace atlab
