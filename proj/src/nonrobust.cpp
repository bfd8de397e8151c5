#include "atlab/nonrobust.hpp"

#include "atlab/idx_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace atlab {

NonRobustBuild build_nonrobust_sets(const LabeledDataset& trainset, const NetworkModel& f1,
                                    const NetworkModel& f2, const NonRobustBuildSpec& spec,
                                    int threads) {
  trainset.validate();
  if (spec.replication < 1) throw std::invalid_argument("replication must be >= 1");
  if (spec.attack.objective.kind != Objective::Kind::NTargeted &&
      spec.attack.objective.kind != Objective::Kind::Targeted)
    throw std::invalid_argument("non-robust build uses the N-targeted attack");

  const Index n = trainset.size();
  const int C = trainset.num_classes;
  const Index total = n * spec.replication;

  NonRobustBuild out;
  std::vector<Index> keep;
  Tensor all_adv;
  std::vector<NonRobustItem> prov(static_cast<std::size_t>(total));

  std::vector<Index> shape = trainset.images.shape;
  shape[0] = total;
  all_adv = Tensor::zeros(shape);
  const Index item = trainset.images.row_size();

  for (int rep = 0; rep < spec.replication; ++rep) {
    const auto y1 = sample_target_classes(trainset.labels, C,
                                          mix_seed(spec.seed, 2 * static_cast<std::uint64_t>(rep)));
    const auto y2 = sample_target_classes(
        trainset.labels, C, mix_seed(spec.seed, 2 * static_cast<std::uint64_t>(rep) + 1));
    AttackSpec attack = spec.attack;
    attack.objective = Objective::n_targeted({y1, y2});
    const Tensor adv = n_targeted({&f1, &f2}, trainset.images, attack, nullptr, threads);
    const auto p1 = predict(f1, adv);
    const auto p2 = predict(f2, adv);
    for (Index i = 0; i < n; ++i) {
      const Index row = static_cast<Index>(rep) * n + i;
      all_adv.data.segment(row * item, item) = adv.data.segment(i * item, item);
      auto& pi = prov[static_cast<std::size_t>(row)];
      pi.source_index = i;
      pi.y = trainset.labels[static_cast<std::size_t>(i)];
      pi.y1_target = y1[static_cast<std::size_t>(i)];
      pi.y2_target = y2[static_cast<std::size_t>(i)];
      pi.f1_success = p1[static_cast<std::size_t>(i)] == pi.y1_target;
      pi.f2_success = p2[static_cast<std::size_t>(i)] == pi.y2_target;
    }
  }

  keep.reserve(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) {
    const auto& pi = prov[static_cast<std::size_t>(i)];
    if (spec.keep_failed || (pi.f1_success && pi.f2_success)) keep.push_back(i);
  }

  auto make_variant = [&](const char* tag) {
    NonRobustDataset ds;
    ds.variant = tag;
    ds.f1_id = spec.f1_id;
    ds.f2_id = spec.f2_id;
    ds.epsilon = spec.attack.resolved().epsilon;
    ds.seed = spec.seed;
    ds.data.num_classes = C;
    std::vector<Index> s = trainset.images.shape;
    s[0] = static_cast<Index>(keep.size());
    ds.data.images = Tensor::zeros(s);
    ds.data.labels.resize(keep.size());
    ds.provenance.resize(keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) {
      const Index row = keep[j];
      ds.data.images.data.segment(static_cast<Index>(j) * item, item) =
          all_adv.data.segment(row * item, item);
      const auto& pi = prov[static_cast<std::size_t>(row)];
      ds.provenance[j] = pi;
      ds.data.labels[j] = std::string(tag) == "Y1" ? pi.y1_target : pi.y2_target;
    }
    return ds;
  };
  out.d1 = make_variant("Y1");
  out.d2 = make_variant("Y2");
  out.stats = recount_stats(out.d1.provenance);
  return out;
}

RetrainResult retrain_and_eval(const NonRobustDataset& nonrobust, const std::string& arch_preset,
                               const OptimizerConfig& cfg, const LabeledDataset& clean_test) {
  NetworkModel model = build_architecture(arch_preset, nonrobust.data.item_shape(),
                                          nonrobust.data.num_classes, mix_seed(cfg.seed, 77));
  RetrainResult res;
  res.history = fit(model, nonrobust.data, cfg, &clean_test);
  res.clean_test_accuracy = res.history.back().test_accuracy;
  res.train_accuracy = res.history.back().train_accuracy;
  return res;
}

SuccessBreakdown success_breakdown(const NonRobustStats& stats) {
  SuccessBreakdown b;
  b.f1_rate = stats.f1_rate();
  b.f2_rate = stats.f2_rate();
  b.joint_rate = stats.joint_rate();
  return b;
}

NonRobustStats recount_stats(const std::vector<NonRobustItem>& provenance) {
  NonRobustStats s;
  s.n_items = static_cast<Index>(provenance.size());
  for (const auto& p : provenance) {
    s.f1_hits += p.f1_success;
    s.f2_hits += p.f2_success;
    s.joint_hits += p.f1_success && p.f2_success;
    s.y1_equals_y2 += p.y1_target == p.y2_target;
  }
  return s;
}

std::string nonrobust_basename(const NonRobustDataset& ds) {
  char eps[32];
  std::snprintf(eps, sizeof(eps), "%g", ds.epsilon);
  return "nonrobust_" + ds.f1_id + "_" + ds.f2_id + "_" + ds.variant + "_eps" + eps + "_seed" +
         std::to_string(ds.seed);
}

void save_nonrobust_dataset(const NonRobustDataset& ds, const std::string& dir) {
  const std::string base = dir + "/" + nonrobust_basename(ds);
  write_idx_images_f64(base + "_images.idx", ds.data.images);
  write_idx_labels(base + "_labels.idx", ds.data.labels);
  nlohmann::json j;
  j["variant"] = ds.variant;
  j["f1_id"] = ds.f1_id;
  j["f2_id"] = ds.f2_id;
  j["epsilon"] = ds.epsilon;
  j["seed"] = ds.seed;
  j["num_classes"] = ds.data.num_classes;
  auto items = nlohmann::json::array();
  for (const auto& p : ds.provenance)
    items.push_back({{"source_index", p.source_index},
                     {"y", p.y},
                     {"y1_target", p.y1_target},
                     {"y2_target", p.y2_target},
                     {"f1_success", p.f1_success},
                     {"f2_success", p.f2_success}});
  j["provenance"] = items;
  std::ofstream os(base + "_provenance.json", std::ios::binary);
  if (!os) throw FormatError("cannot write provenance: " + base);
  os << j.dump(2) << "\n";
}

NonRobustDataset load_nonrobust_dataset(const std::string& dir, const std::string& basename) {
  const std::string base = dir + "/" + basename;
  NonRobustDataset ds;
  std::ifstream is(base + "_provenance.json");
  if (!is) throw FormatError("cannot open provenance: " + base);
  nlohmann::json j;
  is >> j;
  ds.variant = j.at("variant").get<std::string>();
  ds.f1_id = j.at("f1_id").get<std::string>();
  ds.f2_id = j.at("f2_id").get<std::string>();
  ds.epsilon = j.at("epsilon").get<double>();
  ds.seed = j.at("seed").get<std::uint64_t>();
  ds.data.num_classes = j.at("num_classes").get<int>();
  ds.data.images = read_idx_images(base + "_images.idx");
  ds.data.labels = read_idx_labels(base + "_labels.idx");
  for (const auto& it : j.at("provenance")) {
    NonRobustItem p;
    p.source_index = it.at("source_index").get<Index>();
    p.y = it.at("y").get<int>();
    p.y1_target = it.at("y1_target").get<int>();
    p.y2_target = it.at("y2_target").get<int>();
    p.f1_success = it.at("f1_success").get<bool>();
    p.f2_success = it.at("f2_success").get<bool>();
    ds.provenance.push_back(p);
  }
  if (ds.provenance.size() != ds.data.labels.size())
    throw FormatError("provenance / label count mismatch in " + basename);
  ds.data.validate();
  return ds;
}

void verify_nonrobust_dataset(const NonRobustDataset& ds, const LabeledDataset& trainset) {
  const Index item = trainset.images.row_size();
  if (ds.data.images.row_size() != item)
    throw NumericalError("non-robust image shape does not match the source set");
  for (std::size_t i = 0; i < ds.provenance.size(); ++i) {
    const auto& p = ds.provenance[i];
    const int expected = ds.variant == "Y1" ? p.y1_target : p.y2_target;
    if (ds.data.labels[i] != expected)
      throw NumericalError("label provenance violated at item " + std::to_string(i));
    if (p.source_index < 0 || p.source_index >= trainset.size())
      throw NumericalError("provenance source index out of range");
    if (trainset.labels[static_cast<std::size_t>(p.source_index)] != p.y)
      throw NumericalError("provenance true label mismatch at item " + std::to_string(i));
    const ArrayX delta = ds.data.images.row(static_cast<Index>(i)) -
                         trainset.images.row(p.source_index);
    const double dist = std::sqrt((delta * delta).sum());
    if (dist > ds.epsilon + 1e-9)
      throw NumericalError("stored adversarial exceeds the l2 bound at item " +
                           std::to_string(i));
  }
}

}  // namespace atlab
