#include "atlab/attack.hpp"

#include "atlab/idx_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace atlab {

std::string attack_family_name(AttackFamily f) {
  switch (f) {
    case AttackFamily::FGM: return "fgm";
    case AttackFamily::PGD: return "pgd";
    case AttackFamily::MIM: return "mim";
  }
  return "?";
}

AttackFamily attack_family_from_name(const std::string& name) {
  if (name == "fgm" || name == "FGM") return AttackFamily::FGM;
  if (name == "pgd" || name == "PGD") return AttackFamily::PGD;
  if (name == "mim" || name == "MIM") return AttackFamily::MIM;
  throw FormatError("unknown attack family: " + name);
}

Objective Objective::non_targeted(std::vector<int> true_labels) {
  Objective o;
  o.kind = Kind::NonTargeted;
  o.labels = std::move(true_labels);
  return o;
}

Objective Objective::targeted(std::vector<int> target_labels) {
  Objective o;
  o.kind = Kind::Targeted;
  o.labels = std::move(target_labels);
  return o;
}

Objective Objective::n_targeted(std::vector<std::vector<int>> per_model_targets) {
  Objective o;
  o.kind = Kind::NTargeted;
  o.n_targets = std::move(per_model_targets);
  return o;
}

std::string objective_kind_name(Objective::Kind k) {
  switch (k) {
    case Objective::Kind::NonTargeted: return "non-targeted";
    case Objective::Kind::Targeted: return "targeted";
    case Objective::Kind::NTargeted: return "n-targeted";
  }
  return "?";
}

AttackSpec AttackSpec::resolved() const {
  AttackSpec r = *this;
  if (r.epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  const bool ntar = r.objective.kind == Objective::Kind::NTargeted;
  if (r.steps == 0) {
    if (r.family == AttackFamily::FGM)
      r.steps = 1;
    else
      r.steps = ntar ? 100 : 10;
  }
  if (r.step_size == 0.0) {
    if (r.family == AttackFamily::FGM)
      r.step_size = r.epsilon;
    else
      r.step_size = ntar ? 0.1 : r.epsilon / 5.0;
  }
  if (r.family == AttackFamily::FGM && r.steps != 1)
    throw std::invalid_argument("FGM is a single-step attack");
  if (r.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (r.step_size < 0.0) throw std::invalid_argument("step_size must be >= 0");
  if (r.momentum_decay < 0.0) throw std::invalid_argument("momentum_decay must be >= 0");
  return r;
}

namespace {

constexpr double kGradNormFloor = 1e-12;

// Shared stepping core. Every family runs m <- mu*m + g/||g||1 followed by a
// step of alpha along m/||m||2, radial projection onto the eps-ball and pixel
// clipping; FGM/PGD pass mu=0. sign is +1 for loss ascent, -1 for descent.
Tensor attack_core(const std::vector<const NetworkModel*>& models,
                   const std::vector<const std::vector<int>*>& labels, const Tensor& x,
                   double sign, double mu, double eps, int steps, double alpha,
                   const IterateCallback& cb, int threads) {
  if (models.empty()) throw std::invalid_argument("attack needs at least one model");
  const Index n = x.rows();
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    if (models[mi]->mode() != Mode::Eval)
      throw std::invalid_argument("attacked models must be in Eval mode");
    if (models[mi]->input_shape() !=
        std::vector<Index>(x.shape.begin() + 1, x.shape.end()))
      throw std::invalid_argument("attack input shape does not match model " +
                                  std::to_string(mi));
    if (static_cast<Index>(labels[mi]->size()) != n)
      throw std::invalid_argument("attack label count mismatch");
  }
  if (eps == 0.0) return x;  // zero radius: x' = x for every family
  if (threads <= 0) threads = default_threads();

  Tensor adv = x;
  const Index item = x.row_size();
  parallel_for(n, threads, [&](Index b, Index e) {
    const Index count = e - b;
    Tensor cur;
    cur.shape = x.shape;
    cur.shape[0] = count;
    cur.data = x.data.segment(b * item, count * item);
    Tensor orig = cur;
    ArrayX mom = ArrayX::Zero(count * item);
    std::vector<std::vector<int>> chunk_labels(models.size());
    for (std::size_t mi = 0; mi < models.size(); ++mi)
      chunk_labels[mi] = {labels[mi]->begin() + b, labels[mi]->begin() + e};

    ArrayX grad(count * item);
    for (int t = 0; t < steps; ++t) {
      grad.setZero();
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        // grad_scale = count turns the mean-loss gradient into per-example
        // gradients of the per-example losses.
        const auto lg = loss_and_grads(*models[mi], cur, chunk_labels[mi], Wrt::Input,
                                       static_cast<double>(count));
        grad += lg.grads.input.data;
      }
      for (Index i = 0; i < count; ++i) {
        auto g = grad.segment(i * item, item);
        const double gn2 = std::sqrt((g * g).sum());
        if (gn2 < kGradNormFloor) continue;  // degenerate gradient: skip step
        auto m = mom.segment(i * item, item);
        m = mu * m + g / g.abs().sum();
        const double mn2 = std::sqrt((m * m).sum());
        if (mn2 < kGradNormFloor) continue;
        auto xi = cur.data.segment(i * item, item);
        xi += (sign * alpha / mn2) * m;
        // Exact radial projection onto the l2 ball around the original.
        const ArrayX delta = xi - orig.data.segment(i * item, item);
        const double d = std::sqrt((delta * delta).sum());
        if (d > eps) xi = orig.data.segment(i * item, item) + (eps / d) * delta;
        xi = xi.min(1.0).max(0.0);
      }
      if (cb) cb(t, b, cur);
    }
    cur.require_finite("adversarial batch");
    adv.data.segment(b * item, count * item) = cur.data;
  });
  return adv;
}

void require_kind(const AttackSpec& spec, std::initializer_list<Objective::Kind> kinds,
                  const char* who) {
  for (auto k : kinds)
    if (spec.objective.kind == k) return;
  throw std::invalid_argument(std::string(who) + ": unsupported objective " +
                              objective_kind_name(spec.objective.kind));
}

Tensor single_model_attack(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
                           const IterateCallback& cb, int threads) {
  const AttackSpec r = spec.resolved();
  const double sign = r.objective.kind == Objective::Kind::NonTargeted ? +1.0 : -1.0;
  const double mu = r.family == AttackFamily::MIM ? r.momentum_decay : 0.0;
  return attack_core({&model}, {&r.objective.labels}, x, sign, mu, r.epsilon, r.steps,
                     r.step_size, cb, threads);
}

}  // namespace

Tensor fgm(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb, int threads) {
  if (spec.family != AttackFamily::FGM) throw std::invalid_argument("fgm: spec.family != FGM");
  require_kind(spec, {Objective::Kind::NonTargeted, Objective::Kind::Targeted}, "fgm");
  return single_model_attack(model, x, spec, cb, threads);
}

Tensor pgd(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb, int threads) {
  if (spec.family != AttackFamily::PGD) throw std::invalid_argument("pgd: spec.family != PGD");
  require_kind(spec, {Objective::Kind::NonTargeted, Objective::Kind::Targeted}, "pgd");
  return single_model_attack(model, x, spec, cb, threads);
}

Tensor mim(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
           const IterateCallback& cb, int threads) {
  if (spec.family != AttackFamily::MIM) throw std::invalid_argument("mim: spec.family != MIM");
  require_kind(spec, {Objective::Kind::NonTargeted, Objective::Kind::Targeted}, "mim");
  return single_model_attack(model, x, spec, cb, threads);
}

Tensor n_targeted(const std::vector<const NetworkModel*>& models, const Tensor& x,
                  const AttackSpec& spec, const IterateCallback& cb, int threads) {
  require_kind(spec, {Objective::Kind::NTargeted}, "n_targeted");
  const AttackSpec r = spec.resolved();
  if (r.objective.n_targets.size() != models.size())
    throw std::invalid_argument("n_targeted: one target vector per model required");
  std::vector<const std::vector<int>*> labels;
  labels.reserve(models.size());
  for (const auto& t : r.objective.n_targets) labels.push_back(&t);
  const double mu = r.family == AttackFamily::MIM ? r.momentum_decay : 0.0;
  return attack_core(models, labels, x, -1.0, mu, r.epsilon, r.steps, r.step_size, cb, threads);
}

Tensor ensemble_targeted(const std::vector<const NetworkModel*>& models, const Tensor& x,
                         const std::vector<int>& shared_targets, const AttackSpec& spec,
                         const IterateCallback& cb, int threads) {
  AttackSpec s = spec;
  s.objective = Objective::n_targeted(
      std::vector<std::vector<int>>(models.size(), shared_targets));
  return n_targeted(models, x, s, cb, threads);
}

Tensor run_attack(const NetworkModel& model, const Tensor& x, const AttackSpec& spec,
                  int threads) {
  switch (spec.family) {
    case AttackFamily::FGM: return fgm(model, x, spec, nullptr, threads);
    case AttackFamily::PGD: return pgd(model, x, spec, nullptr, threads);
    case AttackFamily::MIM: return mim(model, x, spec, nullptr, threads);
  }
  throw std::invalid_argument("unknown attack family");
}

std::vector<int> sample_target_classes(const std::vector<int>& true_labels, int num_classes,
                                       std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("need at least two classes to pick a target");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, num_classes - 2);
  std::vector<int> targets(true_labels.size());
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const int t = pick(rng);
    targets[i] = t >= true_labels[i] ? t + 1 : t;
  }
  return targets;
}

void AdversarialBatch::validate() const {
  if (!originals.shape_matches(adversarials))
    throw NumericalError("adversarial batch shape mismatch");
  const Index n = originals.rows(), item = originals.row_size();
  const AttackSpec r = spec.resolved();
  for (Index i = 0; i < n; ++i) {
    const ArrayX delta = adversarials.data.segment(i * item, item) -
                         originals.data.segment(i * item, item);
    const double d = std::sqrt((delta * delta).sum());
    if (d > r.epsilon + 1e-9)
      throw NumericalError("adversarial example " + std::to_string(i) + " violates the l2 bound: " +
                           std::to_string(d) + " > " + std::to_string(r.epsilon));
  }
  if ((adversarials.data < 0.0).any() || (adversarials.data > 1.0).any())
    throw NumericalError("adversarial pixels outside [0,1]");
}

namespace {

nlohmann::json spec_to_json(const AttackSpec& spec) {
  nlohmann::json j;
  j["family"] = attack_family_name(spec.family);
  j["epsilon"] = spec.epsilon;
  j["steps"] = spec.steps;
  j["step_size"] = spec.step_size;
  j["momentum_decay"] = spec.momentum_decay;
  j["seed"] = spec.seed;
  j["objective"] = objective_kind_name(spec.objective.kind);
  if (spec.objective.kind == Objective::Kind::NTargeted)
    j["n_targets"] = spec.objective.n_targets;
  else
    j["labels"] = spec.objective.labels;
  return j;
}

AttackSpec spec_from_json(const nlohmann::json& j) {
  AttackSpec spec;
  spec.family = attack_family_from_name(j.at("family").get<std::string>());
  spec.epsilon = j.at("epsilon").get<double>();
  spec.steps = j.at("steps").get<int>();
  spec.step_size = j.at("step_size").get<double>();
  spec.momentum_decay = j.at("momentum_decay").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  const auto kind = j.at("objective").get<std::string>();
  if (kind == "non-targeted")
    spec.objective = Objective::non_targeted(j.at("labels").get<std::vector<int>>());
  else if (kind == "targeted")
    spec.objective = Objective::targeted(j.at("labels").get<std::vector<int>>());
  else if (kind == "n-targeted")
    spec.objective =
        Objective::n_targeted(j.at("n_targets").get<std::vector<std::vector<int>>>());
  else
    throw FormatError("unknown objective kind in sidecar: " + kind);
  return spec;
}

}  // namespace

void save_adversarial_batch(const AdversarialBatch& batch, const std::string& idx_path,
                            const std::string& json_path) {
  write_idx_images_f64(idx_path, batch.adversarials);
  nlohmann::json j;
  j["spec"] = spec_to_json(batch.spec);
  j["true_labels"] = batch.true_labels;
  j["source_predictions"] = batch.source_predictions;
  j["originals_idx"] = nullptr;  // originals are re-derivable from the dataset + sidecar
  std::ofstream os(json_path);
  if (!os) throw FormatError("cannot write sidecar: " + json_path);
  os << j.dump(2) << "\n";
}

AdversarialBatch load_adversarial_batch(const std::string& idx_path,
                                        const std::string& json_path) {
  AdversarialBatch batch;
  batch.adversarials = read_idx_images(idx_path);
  std::ifstream is(json_path);
  if (!is) throw FormatError("cannot open sidecar: " + json_path);
  nlohmann::json j;
  is >> j;
  batch.spec = spec_from_json(j.at("spec"));
  batch.true_labels = j.at("true_labels").get<std::vector<int>>();
  batch.source_predictions = j.at("source_predictions").get<std::vector<std::vector<int>>>();
  return batch;
}

}  // namespace atlab
