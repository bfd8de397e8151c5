#include "atlab/experiment.hpp"

#include "atlab/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

namespace atlab {

namespace fs = std::filesystem;

LabeledDataset correctly_classified_pool(const std::vector<const NetworkModel*>& models,
                                         const LabeledDataset& data, Index max_n,
                                         std::uint64_t seed) {
  std::vector<std::vector<int>> preds;
  preds.reserve(models.size());
  for (const auto* m : models) preds.push_back(predict(*m, data.images));
  std::vector<Index> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> chosen;
  for (Index idx : order) {
    const auto i = static_cast<std::size_t>(idx);
    bool ok = true;
    for (const auto& p : preds) ok = ok && p[i] == data.labels[i];
    if (ok) {
      chosen.push_back(idx);
      if (static_cast<Index>(chosen.size()) == max_n) break;
    }
  }
  return data.select(chosen);
}

EnsembleComparison ensemble_compare(const NetworkModel& source, const NetworkModel& extra,
                                    const NetworkModel& heldout, const LabeledDataset& data,
                                    double epsilon, int steps, Index sample_n, std::uint64_t seed,
                                    int threads) {
  const LabeledDataset pool =
      correctly_classified_pool({&source, &heldout}, data, sample_n, seed);
  EnsembleComparison cmp;
  cmp.n_attacked = pool.size();
  if (pool.size() == 0) return cmp;

  // Same per-image target for both attacks.
  const auto targets = sample_target_classes(pool.labels, data.num_classes, mix_seed(seed, 1));

  AttackSpec vanilla_spec;
  vanilla_spec.family = AttackFamily::PGD;
  vanilla_spec.epsilon = epsilon;
  vanilla_spec.steps = steps;
  vanilla_spec.objective = Objective::targeted(targets);
  const Tensor adv_vanilla = pgd(source, pool.images, vanilla_spec, nullptr, threads);

  AttackSpec ens_spec;
  ens_spec.family = AttackFamily::PGD;
  ens_spec.epsilon = epsilon;
  ens_spec.steps = steps;
  const Tensor adv_ensemble =
      ensemble_targeted({&source, &extra}, pool.images, targets, ens_spec, nullptr, threads);

  auto count = [&](const Tensor& adv, EnsembleComparison::Row& row) {
    const auto p1 = predict(source, adv);
    const auto p2 = predict(heldout, adv);
    for (Index i = 0; i < pool.size(); ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const int y = pool.labels[ii];
      if (p1[ii] == y) {
        ++row.f1_unfooled;
        continue;
      }
      const int y1 = p1[ii];
      if (p2[ii] == y)
        ++row.f2_unfooled;
      else if (p2[ii] == y1)
        ++row.same;
      else
        ++row.different;
    }
  };
  count(adv_vanilla, cmp.vanilla);
  count(adv_ensemble, cmp.ensemble);
  return cmp;
}

std::string ensemble_comparison_csv(const EnsembleComparison& cmp) {
  std::string out = "attack,n,f1_unfooled,f2_unfooled,different,same\n";
  auto row = [&](const char* name, const EnsembleComparison::Row& r) {
    out += std::string(name) + "," + std::to_string(cmp.n_attacked) + "," +
           std::to_string(r.f1_unfooled) + "," + std::to_string(r.f2_unfooled) + "," +
           std::to_string(r.different) + "," + std::to_string(r.same) + "\n";
  };
  row("vanilla", cmp.vanilla);
  row("ensemble", cmp.ensemble);
  return out;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(tasks.begin(), tasks.end(),
                     [](const TaskRecord& t) { return t.status == "ok"; });
}

namespace {

class BundleWriter {
 public:
  explicit BundleWriter(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  std::string path(const std::string& rel) {
    const fs::path p = fs::path(dir_) / rel;
    fs::create_directories(p.parent_path());
    return p.string();
  }

  void record(const std::string& rel) { files_.push_back(rel); }

  void write_text(const std::string& rel, const std::string& text) {
    const std::string p = path(rel);
    std::ofstream os(p, std::ios::binary);
    if (!os) throw FormatError("cannot write " + p);
    os << text;
    record(rel);
  }

  nlohmann::json manifest_files() const {
    auto arr = nlohmann::json::array();
    for (const auto& rel : files_) {
      char hex[17];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv1a64_file((fs::path(dir_) / rel).string())));
      arr.push_back({{"path", rel}, {"fnv1a64", hex}});
    }
    return arr;
  }

  const std::string& dir() const { return dir_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", eps);
  std::string s = buf;
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

nlohmann::json history_json(const TrainingHistory& h) {
  auto arr = nlohmann::json::array();
  for (const auto& e : h) {
    nlohmann::json j{{"epoch", e.epoch}, {"mean_loss", e.mean_loss},
                     {"train_accuracy", e.train_accuracy}};
    if (std::isfinite(e.test_accuracy)) j["test_accuracy"] = e.test_accuracy;
    arr.push_back(j);
  }
  return arr;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads,
                                const ProgressFn& progress) {
  if (threads <= 0) threads = default_threads();
  ExperimentResult result;
  BundleWriter bundle(cfg.output_dir);
  result.output_dir = bundle.dir();
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  auto run_task = [&](const std::string& name, const std::function<void()>& fn) {
    TaskRecord rec;
    rec.name = name;
    try {
      fn();
      rec.status = "ok";
    } catch (const std::exception& ex) {
      rec.status = "error";
      rec.error = ex.what();
      note("task " + name + " failed: " + rec.error);
    }
    result.tasks.push_back(rec);
  };

  note("loading dataset " + cfg.dataset.id);
  LabeledDataset train, test;
  {
    auto pair = load_dataset(cfg.dataset);
    train = std::move(pair.first);
    test = std::move(pair.second);
  }

  note("preparing roster (" + std::to_string(cfg.roster.size()) + " models)");
  Roster roster = prepare_roster(cfg.roster, train, test, cfg.train, progress);
  run_task("checkpoints", [&] {
    nlohmann::json meta = nlohmann::json::array();
    for (const auto& tm : roster.models) {
      const std::string rel = "models/" + tm.entry.id + ".ckpt";
      save_model(tm.model, bundle.path(rel));
      bundle.record(rel);
      meta.push_back({{"id", tm.entry.id},
                      {"preset", tm.entry.preset},
                      {"seed", tm.entry.seed},
                      {"lineage", lineage_to_string(tm.entry.lineage)},
                      {"final_test_accuracy",
                       tm.history.empty() ? nlohmann::json(nullptr)
                                          : nlohmann::json(tm.history.back().test_accuracy)},
                      {"history", history_json(tm.history)}});
    }
    bundle.write_text("models/roster.json", meta.dump(2) + "\n");
  });

  // Attack sweeps: per (attack entry, epsilon, source, target) transfer report.
  std::string csv = transfer_report_csv_header() + "\n";
  const auto sources = roster.source_ids();
  const auto targets = roster.target_ids();
  for (const auto& sweep : cfg.attacks) {
    for (double eps : sweep.epsilons) {
      for (const auto& f1_id : sources) {
        // One eligible set per (attack, eps, F1, F2) pair; Eq. 1 is pairwise.
        for (const auto& f2_id : targets) {
          if (f2_id == f1_id) continue;
          const std::string name = "transfer_" + sweep.id + "_eps" + eps_tag(eps) + "_" + f1_id +
                                   "_" + f2_id;
          run_task(name, [&] {
            AttackSpec spec;
            spec.family = sweep.family;
            spec.epsilon = eps;
            spec.steps = sweep.steps;
            spec.step_size = sweep.step_size;
            spec.momentum_decay = sweep.momentum_decay;
            spec.seed = sweep.seed;
            spec.objective.kind = sweep.objective;
            const auto eligible =
                build_eligible_set(roster.model(f1_id), roster.model(f2_id), test, spec,
                                   std::min(cfg.eval_sample_n, test.size()), cfg.eval_seed,
                                   threads);
            TransferReport rep =
                transfer_report(roster.model(f1_id), roster.model(f2_id), eligible, spec, threads);
            rep.f1_id = f1_id;
            rep.f2_id = f2_id;
            rep.dataset_id = cfg.dataset.id;
            csv += transfer_report_csv_row(rep) + "\n";
            bundle.write_text("reports/" + name + ".json", transfer_report_json(rep) + "\n");
            result.reports.push_back(std::move(rep));
          });
        }
      }
    }
  }
  if (!cfg.attacks.empty()) bundle.write_text("reports/transfer_reports.csv", csv);

  if (cfg.dist_enabled && !sources.empty()) {
    run_task("dist_table", [&] {
      std::string dist_csv = "f1_id,f2_id,dist,capped_f1,capped_f2,n_images\n";
      for (const auto& f1_id : sources) {
        for (const auto& f2_id : targets) {
          if (f2_id == f1_id) continue;
          std::vector<const NetworkModel*> pool_models;
          if (cfg.dist_pool_roster) {
            for (const auto& tm : roster.models) pool_models.push_back(&tm.model);
          } else {
            pool_models = {&roster.model(f1_id), &roster.model(f2_id)};
          }
          const LabeledDataset pool = correctly_classified_pool(
              pool_models, test, cfg.eval_dist_images, mix_seed(cfg.eval_seed, 17));
          const ModelDistance d =
              model_distance(roster.model(f1_id), roster.model(f2_id), pool, cfg.dist_cap,
                             cfg.dist_tol, threads);
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.17g", d.dist);
          dist_csv += f1_id + "," + f2_id + "," + buf + "," + std::to_string(d.capped_f1) + "," +
                      std::to_string(d.capped_f2) + "," + std::to_string(d.n_images) + "\n";
        }
      }
      bundle.write_text("dist/dist_table.csv", dist_csv);
    });
  }

  if (!cfg.grids.image_indices.empty() && !sources.empty()) {
    const std::string& f1_id = sources.front();
    for (Index img_idx : cfg.grids.image_indices) {
      run_task("grid_img" + std::to_string(img_idx), [&] {
        if (img_idx < 0 || img_idx >= test.size())
          throw std::invalid_argument("grid image index out of range");
        Tensor x;
        x.shape = test.item_shape();
        x.data = test.images.row(img_idx);
        const int y = test.labels[static_cast<std::size_t>(img_idx)];
        if (predict_one(roster.model(f1_id), x) != y)
          throw NumericalError("grid image " + std::to_string(img_idx) +
                               " is not correctly classified by " + f1_id);
        const DirectionPair dirs =
            make_direction_pair(roster.model(f1_id), x, y, mix_seed(cfg.grids.seed, img_idx));
        std::vector<std::pair<std::string, BoundaryGrid>> grids;
        for (const auto& tm : roster.models) {
          BoundaryGrid g = boundary_grid(tm.model, x, dirs, cfg.grids.half_extent,
                                         cfg.grids.resolution, threads);
          g.model_id = tm.entry.id;
          g.image_id = img_idx;
          const std::string stem =
              "grids/grid_img" + std::to_string(img_idx) + "_" + tm.entry.id;
          save_boundary_grid(g, bundle.path(stem + ".csv"), bundle.path(stem + ".json"));
          bundle.record(stem + ".csv");
          bundle.record(stem + ".json");
          grids.emplace_back(tm.entry.id, std::move(g));
        }
        const auto& f1_grid = grids.front().second;
        for (std::size_t k = 1; k < grids.size(); ++k) {
          const OverlayGrid overlay = outcome_overlay(f1_grid, grids[k].second, y);
          const std::string rel = "grids/overlay_img" + std::to_string(img_idx) + "_" + f1_id +
                                  "_" + grids[k].first + ".csv";
          save_overlay(overlay, bundle.path(rel));
          bundle.record(rel);
        }
      });
    }
  }

  if (cfg.nonrobust.enabled) {
    run_task("nonrobust_pipeline", [&] {
      NonRobustBuildSpec spec;
      spec.f1_id = cfg.nonrobust.f1;
      spec.f2_id = cfg.nonrobust.f2;
      spec.attack.family = AttackFamily::PGD;
      spec.attack.epsilon = cfg.nonrobust.epsilon;
      spec.attack.steps = cfg.nonrobust.steps;
      spec.attack.step_size = cfg.nonrobust.step_size;
      spec.attack.objective.kind = Objective::Kind::NTargeted;
      spec.replication = cfg.nonrobust.replication;
      spec.seed = cfg.nonrobust.seed;
      note("building non-robust sets (" + spec.f1_id + ", " + spec.f2_id + ")");
      NonRobustBuild build = build_nonrobust_sets(train, roster.model(cfg.nonrobust.f1),
                                                  roster.model(cfg.nonrobust.f2), spec, threads);
      const std::string dir = bundle.path("nonrobust");
      save_nonrobust_dataset(build.d1, dir);
      save_nonrobust_dataset(build.d2, dir);
      for (const auto& ds : {&build.d1, &build.d2}) {
        const std::string base = "nonrobust/" + nonrobust_basename(*ds);
        bundle.record(base + "_images.idx");
        bundle.record(base + "_labels.idx");
        bundle.record(base + "_provenance.json");
      }

      nlohmann::json summary;
      summary["stats"] = {{"n_items", build.stats.n_items},
                          {"f1_rate", build.stats.f1_rate()},
                          {"f2_rate", build.stats.f2_rate()},
                          {"joint_rate", build.stats.joint_rate()},
                          {"y1_equals_y2", build.stats.y1_equals_y2}};
      auto retrains = nlohmann::json::array();
      for (const auto* ds : {&build.d1, &build.d2}) {
        for (const auto& preset : cfg.nonrobust.retrain_presets) {
          note("retraining " + preset + " on " + ds->variant);
          OptimizerConfig rcfg = cfg.nonrobust.retrain;
          rcfg.seed = mix_seed(cfg.nonrobust.seed, fnv1a64(preset.data(), preset.size()) ^
                                                       (ds->variant == "Y1" ? 1 : 2));
          const RetrainResult rr = retrain_and_eval(*ds, preset, rcfg, test);
          retrains.push_back({{"variant", ds->variant},
                              {"preset", preset},
                              {"clean_test_accuracy", rr.clean_test_accuracy},
                              {"train_accuracy", rr.train_accuracy},
                              {"history", history_json(rr.history)}});
        }
      }
      if (cfg.nonrobust.run_random_control) {
        note("retraining random-label control");
        NonRobustDataset control = build.d1;
        control.variant = "control";
        std::mt19937_64 rng(mix_seed(cfg.nonrobust.seed, 999));
        std::uniform_int_distribution<int> cls(0, control.data.num_classes - 1);
        for (auto& y : control.data.labels) y = cls(rng);
        OptimizerConfig rcfg = cfg.nonrobust.retrain;
        rcfg.seed = mix_seed(cfg.nonrobust.seed, 1000);
        const std::string preset = cfg.nonrobust.retrain_presets.front();
        NetworkModel model = build_architecture(preset, control.data.item_shape(),
                                                control.data.num_classes, mix_seed(rcfg.seed, 77));
        const auto hist = fit(model, control.data, rcfg, &test);
        retrains.push_back({{"variant", "control"},
                            {"preset", preset},
                            {"clean_test_accuracy", hist.back().test_accuracy},
                            {"train_accuracy", hist.back().train_accuracy},
                            {"history", history_json(hist)}});
      }
      summary["retrains"] = retrains;
      bundle.write_text("nonrobust/retrain_results.json", summary.dump(2) + "\n");
    });
  }

  if (cfg.ensemble.enabled) {
    run_task("ensemble_compare", [&] {
      const EnsembleComparison cmp = ensemble_compare(
          roster.model(cfg.ensemble.source), roster.model(cfg.ensemble.extra),
          roster.model(cfg.ensemble.heldout), test, cfg.ensemble.epsilon, cfg.ensemble.steps,
          cfg.ensemble.sample_n, cfg.ensemble.seed, threads);
      bundle.write_text("ensemble/ensemble_compare.csv", ensemble_comparison_csv(cmp));
    });
  }

  // Manifest is written last and covers every emitted file.
  nlohmann::json manifest;
  manifest["config_hash"] = cfg.config_hash;
  manifest["dataset_id"] = cfg.dataset.id;
  manifest["eval_seed"] = cfg.eval_seed;
  auto tasks = nlohmann::json::array();
  for (const auto& t : result.tasks) {
    nlohmann::json j{{"name", t.name}, {"status", t.status}};
    if (!t.error.empty()) j["error"] = t.error;
    tasks.push_back(j);
  }
  manifest["tasks"] = tasks;
  manifest["files"] = bundle.manifest_files();
  {
    std::ofstream os(bundle.path("manifest.json"), std::ios::binary);
    if (!os) throw FormatError("cannot write manifest");
    os << manifest.dump(2) << "\n";
  }
  return result;
}

}  // namespace atlab
