#pragma once

#include "atlab/network.hpp"

#include <functional>
#include <optional>
#include <string>

namespace atlab {

enum class AttackFamily { FGM, PGD, MIM };

std::string attack_family_name(AttackFamily f);
AttackFamily attack_family_from_name(const std::string& name);

// Attack objective. NonTargeted carries true labels (loss is maximized away
// from them); Targeted carries target labels (loss is minimized toward them);
// NTargeted carries one target vector per attacked model.
struct Objective {
  enum class Kind { NonTargeted, Targeted, NTargeted };
  Kind kind = Kind::NonTargeted;
  std::vector<int> labels;                  // NonTargeted: true labels; Targeted: targets
  std::vector<std::vector<int>> n_targets;  // NTargeted: per-model targets

  static Objective non_targeted(std::vector<int> true_labels);
  static Objective targeted(std::vector<int> target_labels);
  static Objective n_targeted(std::vector<std::vector<int>> per_model_targets);
};

std::string objective_kind_name(Objective::Kind k);

// l2 attack parameters. steps/step_size of 0 mean "use the defaults":
// FGM one step of size epsilon; PGD/MIM 10 steps of epsilon/5; the
// N-targeted configuration 100 steps of 0.1.
struct AttackSpec {
  AttackFamily family = AttackFamily::PGD;
  double epsilon = 1.0;
  int steps = 0;
  double step_size = 0.0;
  Objective objective;
  double momentum_decay = 1.0;  // MIM only
  std::uint64_t seed = 0;

  AttackSpec resolved() const;  // fills defaults and validates
};

// Observer over intermediate iterates: (step index, chunk start row, state of
// that chunk). Invoked concurrently when the attack runs multi-threaded.
using IterateCallback = std::function<void(int, Index, const Tensor&)>;

// Single l2 gradient step: x' = clip(x + s*eps*g/||g||2); zero gradient
// returns x unchanged.
Tensor fgm(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb = nullptr, int threads = 0);

// Iterated normalized-gradient steps with exact radial projection onto the
// eps-ball after each step, then pixel clipping. Deterministic start at x.
Tensor pgd(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb = nullptr, int threads = 0);

// Momentum variant: m <- mu*m + g/||g||1, step along m/||m||2. PGD and FGM are
// the mu=0 special case of the same update, which keeps the reduction
// identities pgd(1, eps) == fgm and mim(mu=0) == pgd bitwise.
Tensor mim(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb = nullptr, int threads = 0);

// PGD-style minimization of the summed per-model targeted losses.
Tensor n_targeted(const std::vector<const NetworkModel*>& models, const Tensor& x,
                  const AttackSpec& spec, const IterateCallback& cb = nullptr, int threads = 0);

// N-targeted attack with one shared target per image for every model.
Tensor ensemble_targeted(const std::vector<const NetworkModel*>& models, const Tensor& x,
                         const std::vector<int>& shared_targets, const AttackSpec& spec,
                         const IterateCallback& cb = nullptr, int threads = 0);

// Dispatch on spec.family/objective for single-model attacks.
Tensor run_attack(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
                  int threads = 0);

// Uniform draw over the num_classes-1 labels distinct from each true label.
std::vector<int> sample_target_classes(const std::vector<int>& true_labels, int num_classes,
                                       std::uint64_t seed);

struct AdversarialBatch {
  Tensor originals;
  Tensor adversarials;
  std::vector<int> true_labels;
  std::vector<std::vector<int>> source_predictions;  // one vector per attacked model
  AttackSpec spec;

  // Per-example feasibility: ||x'-x||_2 <= eps + 1e-9 and pixels in [0,1].
  void validate() const;
};

// IDX image file (float64) plus JSON sidecar with spec, labels, targets and
// source predictions.
void save_adversarial_batch(const AdversarialBatch& batch, const std::string& idx_path,
                            const std::string& json_path);
AdversarialBatch load_adversarial_batch(const std::string& idx_path, const std::string& json_path);

}  // namespace atlab
