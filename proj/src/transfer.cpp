#include "atlab/transfer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace atlab {

std::string outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Unfooled: return "unfooled";
    case Outcome::DifferentMistake: return "different_mistake";
    case Outcome::SameMistake: return "same_mistake";
  }
  return "?";
}

std::vector<EligibleItem> build_eligible_set(const NetworkModel& f1, const NetworkModel& f2,
                                             const LabeledDataset& data, const AttackSpec& attack,
                                             Index sample_n, std::uint64_t seed, int threads) {
  if (sample_n > data.size())
    throw std::invalid_argument("build_eligible_set: sample_n exceeds dataset size");
  if (attack.objective.kind == Objective::Kind::NTargeted)
    throw std::invalid_argument("build_eligible_set: attack on F1 must be single-model");

  // Both-correct filter over a seeded permutation, without replacement.
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto pred1 = predict(f1, data.images);
  const auto pred2 = predict(f2, data.images);
  std::vector<Index> chosen;
  for (Index idx : order) {
    const auto i = static_cast<std::size_t>(idx);
    if (pred1[i] == data.labels[i] && pred2[i] == data.labels[i]) {
      chosen.push_back(idx);
      if (static_cast<Index>(chosen.size()) == sample_n) break;
    }
  }
  if (chosen.empty()) return {};

  const LabeledDataset sampled = data.select(chosen);
  AttackSpec spec = attack;
  std::optional<std::vector<int>> targets;
  if (spec.objective.kind == Objective::Kind::NonTargeted) {
    spec.objective = Objective::non_targeted(sampled.labels);
  } else {
    targets = sample_target_classes(sampled.labels, data.num_classes, spec.seed);
    spec.objective = Objective::targeted(*targets);
  }
  const Tensor adv = run_attack(f1, sampled.images, spec, threads);
  const auto adv_pred = predict(f1, adv);

  std::vector<EligibleItem> eligible;
  const Index item = sampled.images.row_size();
  for (Index i = 0; i < sampled.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    if (adv_pred[ii] == sampled.labels[ii]) continue;  // attack failed on F1
    EligibleItem e;
    e.x.shape = sampled.item_shape();
    e.x.data = sampled.images.data.segment(i * item, item);
    e.x_adv.shape = e.x.shape;
    e.x_adv.data = adv.data.segment(i * item, item);
    e.y = sampled.labels[ii];
    e.y1 = adv_pred[ii];
    e.source_index = chosen[ii];
    if (targets) e.intended_target = (*targets)[ii];
    eligible.push_back(std::move(e));
  }
  return eligible;
}

Outcome classify_outcome(const NetworkModel& f2, const EligibleItem& item) {
  const int label = predict_one(f2, item.x_adv);
  if (label == item.y) return Outcome::Unfooled;
  if (label == item.y1) return Outcome::SameMistake;
  return Outcome::DifferentMistake;
}

bool verify_eligible(const NetworkModel& f1, const NetworkModel& f2, const EligibleItem& item) {
  if (item.y1 == item.y) return false;
  return predict_one(f1, item.x) == item.y && predict_one(f2, item.x) == item.y &&
         predict_one(f1, item.x_adv) == item.y1;
}

TransferReport transfer_report(const NetworkModel& f1, const NetworkModel& f2,
                               const std::vector<EligibleItem>& eligible,
                               const AttackSpec& attack, int threads) {
  (void)f1;
  TransferReport r;
  r.attack = attack;
  r.n_eligible = static_cast<Index>(eligible.size());
  if (threads <= 0) threads = default_threads();

  std::vector<int> f2_labels(eligible.size());
  parallel_for(r.n_eligible, threads, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i)
      f2_labels[static_cast<std::size_t>(i)] =
          predict_one(f2, eligible[static_cast<std::size_t>(i)].x_adv);
  });

  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const auto& item = eligible[i];
    const int l2 = f2_labels[i];
    if (l2 == item.y) {
      ++r.unfooled;
    } else if (l2 == item.y1) {
      ++r.same_mistake;
      r.mistake_pairs.emplace_back(item.y1, l2);
    } else {
      ++r.different_mistake;
      r.mistake_pairs.emplace_back(item.y1, l2);
    }
    if (item.intended_target && *item.intended_target == item.y1) {
      ++r.y1_equals_target;
      if (l2 == item.y1) ++r.same_mistake_on_target;
    }
  }
  if (r.n_eligible > 0) {
    const double n = static_cast<double>(r.n_eligible);
    r.unfooled_ratio = r.unfooled / n;
    r.different_ratio = r.different_mistake / n;
    r.same_ratio = r.same_mistake / n;
    r.fooled_ratio = (r.different_mistake + r.same_mistake) / n;
  }
  return r;
}

std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_ratio(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string("null");
}

}  // namespace

std::string transfer_report_csv_header() {
  return "f1_id,f2_id,attack_family,objective,epsilon,steps,n_eligible,unfooled,different,same,"
         "unfooled_ratio,different_ratio,same_ratio";
}

std::string transfer_report_csv_row(const TransferReport& r) {
  const AttackSpec spec = r.attack.resolved();
  std::string row;
  row += r.f1_id + "," + r.f2_id + ",";
  row += attack_family_name(spec.family) + "," + objective_kind_name(spec.objective.kind) + ",";
  row += fmt_double(spec.epsilon) + "," + std::to_string(spec.steps) + ",";
  row += std::to_string(r.n_eligible) + "," + std::to_string(r.unfooled) + "," +
         std::to_string(r.different_mistake) + "," + std::to_string(r.same_mistake) + ",";
  row += fmt_ratio(r.unfooled_ratio) + "," + fmt_ratio(r.different_ratio) + "," +
         fmt_ratio(r.same_ratio);
  return row;
}

std::string transfer_report_json(const TransferReport& r) {
  nlohmann::json j;
  const AttackSpec spec = r.attack.resolved();
  j["f1_id"] = r.f1_id;
  j["f2_id"] = r.f2_id;
  j["dataset_id"] = r.dataset_id;
  j["attack"] = {{"family", attack_family_name(spec.family)},
                 {"objective", objective_kind_name(spec.objective.kind)},
                 {"epsilon", spec.epsilon},
                 {"steps", spec.steps},
                 {"step_size", spec.step_size},
                 {"seed", spec.seed}};
  j["n_eligible"] = r.n_eligible;
  j["unfooled"] = r.unfooled;
  j["different_mistake"] = r.different_mistake;
  j["same_mistake"] = r.same_mistake;
  auto ratio = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["unfooled_ratio"] = ratio(r.unfooled_ratio);
  j["different_ratio"] = ratio(r.different_ratio);
  j["same_ratio"] = ratio(r.same_ratio);
  j["fooled_ratio"] = ratio(r.fooled_ratio);
  j["targeted"] = spec.objective.kind != Objective::Kind::NonTargeted;
  j["y1_equals_target"] = r.y1_equals_target;
  j["same_mistake_on_target"] = r.same_mistake_on_target;
  auto pairs = nlohmann::json::array();
  for (const auto& [y1, l2] : r.mistake_pairs) pairs.push_back({y1, l2});
  j["mistake_pairs"] = pairs;
  return j.dump(2);
}

}  // namespace atlab
