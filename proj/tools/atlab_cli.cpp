// Command-line front end for the adversarial transferability lab.

#include "atlab/checkpoint.hpp"
#include "atlab/experiment.hpp"
#include "atlab/idx_io.hpp"
#include "atlab/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace atlab;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir = "out";
  int threads = 1;
};

DatasetConfig dataset_from_config(const GlobalArgs& g) {
  if (g.config_path.empty()) {
    DatasetConfig d;  // synthetic defaults
    if (g.seed_set) d.synthetic.seed = g.seed;
    return d;
  }
  return load_experiment_config(g.config_path).dataset;
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  os << text;
}

Objective::Kind objective_from_name(const std::string& name) {
  if (name == "non-targeted") return Objective::Kind::NonTargeted;
  if (name == "targeted") return Objective::Kind::Targeted;
  throw std::invalid_argument("objective must be non-targeted|targeted");
}

struct AttackFlags {
  std::string family = "pgd";
  std::string objective = "non-targeted";
  double epsilon = 1.0;
  int steps = 0;
  double step_size = 0.0;

  void attach(CLI::App* sub) {
    sub->add_option("--family", family, "fgm|pgd|mim");
    sub->add_option("--objective", objective, "non-targeted|targeted");
    sub->add_option("--epsilon", epsilon, "l2 radius");
    sub->add_option("--steps", steps, "0 = family default");
    sub->add_option("--step-size", step_size, "0 = family default");
  }

  AttackSpec spec(std::uint64_t seed) const {
    AttackSpec s;
    s.family = attack_family_from_name(family);
    s.objective.kind = objective_from_name(objective);
    s.epsilon = epsilon;
    s.steps = steps;
    s.step_size = step_size;
    s.seed = seed;
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial transferability lab"};
  app.require_subcommand(0, 1);
  GlobalArgs g;
  app.add_option("--config", g.config_path, "experiment/dataset config file");
  auto* seed_opt = app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads");

  // train
  std::string train_preset = "FC-2", train_id = "model";
  OptimizerConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "train one model and save a checkpoint");
  train_cmd->add_option("--preset", train_preset, "FC-2|FC-4|Conv-2|Conv-4");
  train_cmd->add_option("--id", train_id, "checkpoint stem");
  train_cmd->add_option("--epochs", train_cfg.epochs);
  train_cmd->add_option("--lr", train_cfg.learning_rate);
  train_cmd->add_option("--batch-size", train_cfg.batch_size);

  // attack
  std::string atk_model;
  AttackFlags atk_flags;
  Index atk_sample_n = 100;
  auto* atk_cmd = app.add_subcommand("attack", "generate adversarial examples for a checkpoint");
  atk_cmd->add_option("--model", atk_model, "source checkpoint")->required();
  atk_flags.attach(atk_cmd);
  atk_cmd->add_option("--sample-n", atk_sample_n);

  // transfer-eval
  std::string te_f1, te_f2;
  AttackFlags te_flags;
  Index te_sample_n = 2000;
  auto* te_cmd = app.add_subcommand("transfer-eval", "transfer report for a model pair");
  te_cmd->add_option("--f1", te_f1, "source checkpoint")->required();
  te_cmd->add_option("--f2", te_f2, "target checkpoint")->required();
  te_flags.attach(te_cmd);
  te_cmd->add_option("--sample-n", te_sample_n);

  // dist
  std::vector<std::string> dist_models;
  Index dist_images = 1000;
  double dist_cap = 2.0, dist_tol = 1e-4;
  auto* dist_cmd = app.add_subcommand("dist", "decision-boundary distance table");
  dist_cmd->add_option("--models", dist_models, "checkpoints")->required()->expected(2, -1);
  dist_cmd->add_option("--images", dist_images);
  dist_cmd->add_option("--cap", dist_cap);
  dist_cmd->add_option("--tol", dist_tol);

  // boundary-grid
  std::string grid_f1, grid_f2;
  Index grid_image = 0, grid_he = 30, grid_res = 61;
  auto* grid_cmd = app.add_subcommand("boundary-grid", "2-D decision boundary grid");
  grid_cmd->add_option("--f1", grid_f1, "source checkpoint (directions)")->required();
  grid_cmd->add_option("--f2", grid_f2, "target checkpoint (overlay)");
  grid_cmd->add_option("--image", grid_image, "test-set image index");
  grid_cmd->add_option("--half-extent", grid_he);
  grid_cmd->add_option("--resolution", grid_res);

  // nonrobust-build
  std::string nb_f1, nb_f2;
  double nb_eps = 2.0, nb_step = 0.1;
  int nb_steps = 100, nb_rep = 1;
  auto* nb_cmd = app.add_subcommand("nonrobust-build", "build the relabeled non-robust datasets");
  nb_cmd->add_option("--f1", nb_f1)->required();
  nb_cmd->add_option("--f2", nb_f2)->required();
  nb_cmd->add_option("--epsilon", nb_eps);
  nb_cmd->add_option("--steps", nb_steps);
  nb_cmd->add_option("--step-size", nb_step);
  nb_cmd->add_option("--replication", nb_rep);

  // nonrobust-train
  std::string nt_dir, nt_base, nt_preset = "Conv-2";
  OptimizerConfig nt_cfg;
  auto* nt_cmd = app.add_subcommand("nonrobust-train", "retrain on a saved non-robust set");
  nt_cmd->add_option("--dir", nt_dir)->required();
  nt_cmd->add_option("--basename", nt_base)->required();
  nt_cmd->add_option("--preset", nt_preset);
  nt_cmd->add_option("--epochs", nt_cfg.epochs);
  nt_cmd->add_option("--lr", nt_cfg.learning_rate);
  nt_cmd->add_option("--batch-size", nt_cfg.batch_size);

  // ensemble-compare
  std::string ec_source, ec_extra, ec_heldout;
  double ec_eps = 2.0;
  int ec_steps = 10;
  Index ec_sample_n = 2000;
  auto* ec_cmd = app.add_subcommand("ensemble-compare", "vanilla vs ensemble targeted counts");
  ec_cmd->add_option("--source", ec_source)->required();
  ec_cmd->add_option("--extra", ec_extra)->required();
  ec_cmd->add_option("--heldout", ec_heldout)->required();
  ec_cmd->add_option("--epsilon", ec_eps);
  ec_cmd->add_option("--steps", ec_steps);
  ec_cmd->add_option("--sample-n", ec_sample_n);

  // theory-sim
  std::vector<Index> ts_d = {1000};
  std::vector<double> ts_eta = {0.11};
  Index ts_n = 100000;
  auto* ts_cmd = app.add_subcommand("theory-sim", "closed form vs Monte Carlo sweep (CSV)");
  ts_cmd->add_option("--d", ts_d, "weak feature counts");
  ts_cmd->add_option("--eta", ts_eta, "mean shifts");
  ts_cmd->add_option("--n", ts_n, "Monte Carlo samples per cell");

  auto* run_cmd = app.add_subcommand("run", "execute a full experiment config");

  try {
    app.parse(argc, argv);
    g.seed_set = seed_opt->count() > 0;
    set_default_threads(g.threads);

    if (*train_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      train_cfg.seed = g.seed;
      NetworkModel model =
          build_architecture(train_preset, train_set.item_shape(), train_set.num_classes, g.seed);
      const auto history =
          fit(model, train_set, train_cfg, &test_set,
              [](int epoch, const NetworkModel&, const EpochStats& s) {
                std::fprintf(stderr, "epoch %d loss %.4f train %.4f test %.4f\n", epoch,
                             s.mean_loss, s.train_accuracy, s.test_accuracy);
              });
      fs::create_directories(g.out_dir);
      save_model(model, g.out_dir + "/" + train_id + ".ckpt");
      nlohmann::json j = nlohmann::json::array();
      for (const auto& e : history)
        j.push_back({{"epoch", e.epoch},
                     {"mean_loss", e.mean_loss},
                     {"train_accuracy", e.train_accuracy},
                     {"test_accuracy", e.test_accuracy}});
      write_file(g.out_dir + "/" + train_id + "_history.json", j.dump(2) + "\n");
      std::cout << "final test accuracy " << history.back().test_accuracy << "\n";
      return 0;
    }

    if (*atk_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      NetworkModel model = load_model(atk_model);
      const Index n = std::min<Index>(atk_sample_n, test_set.size());
      std::vector<Index> idx(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
      const LabeledDataset sampled = test_set.select(idx);
      AttackSpec spec = atk_flags.spec(g.seed);
      if (spec.objective.kind == Objective::Kind::NonTargeted)
        spec.objective = Objective::non_targeted(sampled.labels);
      else
        spec.objective = Objective::targeted(
            sample_target_classes(sampled.labels, sampled.num_classes, g.seed));
      AdversarialBatch batch;
      batch.originals = sampled.images;
      batch.true_labels = sampled.labels;
      batch.spec = spec;
      batch.adversarials = run_attack(model, sampled.images, spec, g.threads);
      batch.source_predictions = {predict(model, batch.adversarials)};
      batch.validate();
      fs::create_directories(g.out_dir);
      save_adversarial_batch(batch, g.out_dir + "/adversarial.idx",
                             g.out_dir + "/adversarial.json");
      Index fooled = 0;
      for (std::size_t i = 0; i < batch.true_labels.size(); ++i)
        fooled += batch.source_predictions[0][i] != batch.true_labels[i];
      std::cout << "attacked " << n << " images, source fooled on " << fooled << "\n";
      return 0;
    }

    if (*te_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      NetworkModel f1 = load_model(te_f1);
      NetworkModel f2 = load_model(te_f2);
      const AttackSpec spec = te_flags.spec(g.seed);
      const auto eligible = build_eligible_set(f1, f2, test_set, spec,
                                               std::min(te_sample_n, test_set.size()), g.seed,
                                               g.threads);
      TransferReport rep = transfer_report(f1, f2, eligible, spec, g.threads);
      rep.f1_id = te_f1;
      rep.f2_id = te_f2;
      write_file(g.out_dir + "/transfer_report.json", transfer_report_json(rep) + "\n");
      write_file(g.out_dir + "/transfer_report.csv",
                 transfer_report_csv_header() + "\n" + transfer_report_csv_row(rep) + "\n");
      std::cout << transfer_report_csv_header() << "\n" << transfer_report_csv_row(rep) << "\n";
      return 0;
    }

    if (*dist_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      std::vector<NetworkModel> models;
      for (const auto& p : dist_models) models.push_back(load_model(p));
      std::vector<const NetworkModel*> all;
      for (const auto& m : models) all.push_back(&m);
      const LabeledDataset pool = correctly_classified_pool(all, test_set, dist_images, g.seed);
      std::string csv = "f1,f2,dist,capped_f1,capped_f2,n_images\n";
      for (std::size_t a = 0; a < models.size(); ++a)
        for (std::size_t b = 0; b < models.size(); ++b) {
          if (a == b) continue;
          const auto d = model_distance(models[a], models[b], pool, dist_cap, dist_tol, g.threads);
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.17g", d.dist);
          csv += dist_models[a] + "," + dist_models[b] + "," + buf + "," +
                 std::to_string(d.capped_f1) + "," + std::to_string(d.capped_f2) + "," +
                 std::to_string(d.n_images) + "\n";
        }
      write_file(g.out_dir + "/dist_table.csv", csv);
      std::cout << csv;
      return 0;
    }

    if (*grid_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      NetworkModel f1 = load_model(grid_f1);
      if (grid_image < 0 || grid_image >= test_set.size())
        throw std::invalid_argument("--image out of range");
      Tensor x;
      x.shape = test_set.item_shape();
      x.data = test_set.images.row(grid_image);
      const int y = test_set.labels[static_cast<std::size_t>(grid_image)];
      const DirectionPair dirs = make_direction_pair(f1, x, y, g.seed);
      BoundaryGrid g1 = boundary_grid(f1, x, dirs, grid_he, grid_res, g.threads);
      g1.model_id = "f1";
      g1.image_id = grid_image;
      fs::create_directories(g.out_dir);
      save_boundary_grid(g1, g.out_dir + "/grid_f1.csv", g.out_dir + "/grid_f1.json");
      if (!grid_f2.empty()) {
        NetworkModel f2 = load_model(grid_f2);
        BoundaryGrid g2 = boundary_grid(f2, x, dirs, grid_he, grid_res, g.threads);
        g2.model_id = "f2";
        g2.image_id = grid_image;
        save_boundary_grid(g2, g.out_dir + "/grid_f2.csv", g.out_dir + "/grid_f2.json");
        save_overlay(outcome_overlay(g1, g2, y), g.out_dir + "/overlay.csv");
      }
      std::cout << "grid written to " << g.out_dir << "\n";
      return 0;
    }

    if (*nb_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)test_set;
      NetworkModel f1 = load_model(nb_f1);
      NetworkModel f2 = load_model(nb_f2);
      NonRobustBuildSpec spec;
      spec.f1_id = "f1";
      spec.f2_id = "f2";
      spec.attack.family = AttackFamily::PGD;
      spec.attack.objective.kind = Objective::Kind::NTargeted;
      spec.attack.epsilon = nb_eps;
      spec.attack.steps = nb_steps;
      spec.attack.step_size = nb_step;
      spec.replication = nb_rep;
      spec.seed = g.seed;
      const auto build = build_nonrobust_sets(train_set, f1, f2, spec, g.threads);
      fs::create_directories(g.out_dir);
      save_nonrobust_dataset(build.d1, g.out_dir);
      save_nonrobust_dataset(build.d2, g.out_dir);
      const auto b = success_breakdown(build.stats);
      std::printf("f1_rate %.4f f2_rate %.4f joint_rate %.4f (n=%lld)\n", b.f1_rate, b.f2_rate,
                  b.joint_rate, static_cast<long long>(build.stats.n_items));
      return 0;
    }

    if (*nt_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      const auto ds = load_nonrobust_dataset(nt_dir, nt_base);
      nt_cfg.seed = g.seed;
      const auto rr = retrain_and_eval(ds, nt_preset, nt_cfg, test_set);
      std::printf("clean test accuracy %.4f (train %.4f)\n", rr.clean_test_accuracy,
                  rr.train_accuracy);
      return 0;
    }

    if (*ec_cmd) {
      auto [train_set, test_set] = load_dataset(dataset_from_config(g));
      (void)train_set;
      NetworkModel source = load_model(ec_source);
      NetworkModel extra = load_model(ec_extra);
      NetworkModel heldout = load_model(ec_heldout);
      const auto cmp = ensemble_compare(source, extra, heldout, test_set, ec_eps, ec_steps,
                                        ec_sample_n, g.seed, g.threads);
      const std::string csv = ensemble_comparison_csv(cmp);
      write_file(g.out_dir + "/ensemble_compare.csv", csv);
      std::cout << csv;
      return 0;
    }

    if (*ts_cmd) {
      std::string csv = "scheme,d,eta,perturbed,closed_form,mc_estimate,mc_stderr,n,seed\n";
      std::uint64_t stream = 0;
      for (Index d : ts_d) {
        for (double eta : ts_eta) {
          theory::TheoryParams params;
          params.d = d;
          params.eta = eta;
          for (auto scheme : {theory::Scheme::Unif, theory::Scheme::A, theory::Scheme::B}) {
            for (bool perturbed : {false, true}) {
              const std::uint64_t seed = mix_seed(g.seed, stream++);
              const double cf = theory::closed_form_accuracy(scheme, params, perturbed);
              const auto mc = theory::monte_carlo_accuracy(scheme, params, perturbed, ts_n, seed);
              char row[256];
              std::snprintf(row, sizeof(row), "%s,%lld,%.17g,%d,%.17g,%.17g,%.17g,%lld,%llu\n",
                            theory::scheme_name(scheme).c_str(), static_cast<long long>(d), eta,
                            perturbed ? 1 : 0, cf, mc.estimate, mc.stderr_,
                            static_cast<long long>(ts_n), static_cast<unsigned long long>(seed));
              csv += row;
            }
          }
        }
      }
      write_file(g.out_dir + "/theory_sweep.csv", csv);
      std::cout << csv;
      return 0;
    }

    if (*run_cmd) {
      if (g.config_path.empty()) throw std::invalid_argument("run requires --config");
      ExperimentConfig cfg = load_experiment_config(g.config_path);
      cfg.output_dir = g.out_dir;
      if (g.seed_set) cfg.eval_seed = g.seed;
      const auto result = run_experiment(cfg, g.threads, [](const std::string& msg) {
        std::fprintf(stderr, "[atlab] %s\n", msg.c_str());
      });
      std::cout << "bundle written to " << result.output_dir << " (" << result.tasks.size()
                << " tasks, " << (result.all_ok() ? "all ok" : "with errors") << ")\n";
      return result.all_ok() ? 0 : 3;
    }

    std::cerr << app.help() << "\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const FormatError& e) {
    std::cerr << "data/format error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
