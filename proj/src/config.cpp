#include "atlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace atlab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.index_.count(key))
      throw FormatError("config line " + std::to_string(lineno) + ": duplicate key " + key);
    cfg.entries_.emplace_back(key, value);
    cfg.index_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

bool KeyValueConfig::has(const std::string& key) const { return index_.count(key) > 0; }

std::string KeyValueConfig::get(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw FormatError("missing config key: " + key);
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = index_.find(key);
  return it == index_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? std::stod(get(key)) : fallback;
}

Index KeyValueConfig::get_index(const std::string& key, Index fallback) const {
  return has(key) ? static_cast<Index>(std::stoll(get(key))) : fallback;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  return has(key) ? std::stoi(get(key)) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("config key " + key + ": expected a boolean, got '" + v + "'");
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? std::stoull(get(key)) : fallback;
}

std::vector<std::string> KeyValueConfig::get_string_list(const std::string& key) const {
  std::vector<std::string> out;
  if (!has(key)) return out;
  std::istringstream is(get(key));
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_string_list(key)) out.push_back(std::stod(s));
  return out;
}

std::vector<std::string> KeyValueConfig::section_ids(const std::string& prefix) const {
  std::vector<std::string> ids;
  const std::string tag = prefix + ".";
  for (const auto& [key, value] : entries_) {
    if (key.compare(0, tag.size(), tag) != 0) continue;
    const auto rest = key.substr(tag.size());
    const auto dot = rest.find('.');
    if (dot == std::string::npos) continue;
    const auto id = rest.substr(0, dot);
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  return ids;
}

std::string KeyValueConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

ModelLineage parse_lineage(const std::string& text) {
  ModelLineage l;
  if (text == "fresh" || text.empty()) return l;
  const std::string same = "same-init-as:";
  const std::string snap = "epoch-snapshot-of:";
  if (text.compare(0, same.size(), same) == 0) {
    l.kind = ModelLineage::Kind::SameInitAs;
    l.parent = text.substr(same.size());
    if (l.parent.empty()) throw FormatError("lineage missing parent id: " + text);
    return l;
  }
  if (text.compare(0, snap.size(), snap) == 0) {
    const auto at = text.rfind('@');
    if (at == std::string::npos || at <= snap.size())
      throw FormatError("epoch-snapshot lineage needs <id>@<epoch>: " + text);
    l.kind = ModelLineage::Kind::EpochSnapshotOf;
    l.parent = text.substr(snap.size(), at - snap.size());
    l.epoch = std::stoi(text.substr(at + 1));
    if (l.epoch < 1) throw FormatError("snapshot epoch must be >= 1: " + text);
    return l;
  }
  throw FormatError("unknown lineage: " + text);
}

std::string lineage_to_string(const ModelLineage& l) {
  switch (l.kind) {
    case ModelLineage::Kind::Fresh: return "fresh";
    case ModelLineage::Kind::SameInitAs: return "same-init-as:" + l.parent;
    case ModelLineage::Kind::EpochSnapshotOf:
      return "epoch-snapshot-of:" + l.parent + "@" + std::to_string(l.epoch);
  }
  return "?";
}

namespace {

std::vector<Index> parse_shape(const std::string& text) {
  std::vector<Index> shape;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, 'x')) shape.push_back(std::stoll(tok));
  if (shape.empty()) throw FormatError("empty shape: " + text);
  return shape;
}

OptimizerConfig parse_optimizer(const KeyValueConfig& kv, const std::string& prefix,
                                const OptimizerConfig& defaults) {
  OptimizerConfig cfg = defaults;
  cfg.learning_rate = kv.get_double(prefix + ".learning_rate", cfg.learning_rate);
  cfg.momentum = kv.get_double(prefix + ".momentum", cfg.momentum);
  cfg.weight_decay = kv.get_double(prefix + ".weight_decay", cfg.weight_decay);
  if (kv.has(prefix + ".lr_decay_epochs")) {
    cfg.lr_decay_epochs.clear();
    for (double e : kv.get_double_list(prefix + ".lr_decay_epochs"))
      cfg.lr_decay_epochs.push_back(static_cast<int>(e));
  }
  cfg.lr_decay_factor = kv.get_double(prefix + ".lr_decay_factor", cfg.lr_decay_factor);
  cfg.epochs = kv.get_int(prefix + ".epochs", cfg.epochs);
  cfg.batch_size = kv.get_int(prefix + ".batch_size", cfg.batch_size);
  cfg.seed = kv.get_u64(prefix + ".seed", cfg.seed);
  return cfg;
}

}  // namespace

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.config_hash = fnv1a64_hex(kv.canonical_text());

  const std::string source = kv.get_or("dataset.source", "synthetic");
  if (source == "synthetic") {
    cfg.dataset.source = DatasetConfig::Source::Synthetic;
    auto& s = cfg.dataset.synthetic;
    s.num_classes = kv.get_int("dataset.synthetic.num_classes", s.num_classes);
    if (kv.has("dataset.synthetic.shape")) s.shape = parse_shape(kv.get("dataset.synthetic.shape"));
    s.mean_radius = kv.get_double("dataset.synthetic.mean_radius", s.mean_radius);
    s.noise_scale = kv.get_double("dataset.synthetic.noise_scale", s.noise_scale);
    s.class_mix = kv.get_double("dataset.synthetic.class_mix", s.class_mix);
    s.train_count = kv.get_index("dataset.synthetic.train_count", s.train_count);
    s.test_count = kv.get_index("dataset.synthetic.test_count", s.test_count);
    s.seed = kv.get_u64("dataset.synthetic.seed", s.seed);
  } else if (source == "idx") {
    cfg.dataset.source = DatasetConfig::Source::Idx;
    cfg.dataset.idx_train_images = kv.get("dataset.idx.train_images");
    cfg.dataset.idx_train_labels = kv.get("dataset.idx.train_labels");
    cfg.dataset.idx_test_images = kv.get("dataset.idx.test_images");
    cfg.dataset.idx_test_labels = kv.get("dataset.idx.test_labels");
  } else if (source == "cifar") {
    cfg.dataset.source = DatasetConfig::Source::Cifar;
    cfg.dataset.cifar_train = kv.get_string_list("dataset.cifar.train");
    cfg.dataset.cifar_test = kv.get_string_list("dataset.cifar.test");
    if (cfg.dataset.cifar_train.empty() || cfg.dataset.cifar_test.empty())
      throw FormatError("cifar dataset needs dataset.cifar.train and dataset.cifar.test");
  } else {
    throw FormatError("unknown dataset.source: " + source);
  }
  cfg.dataset.id = kv.get_or("dataset.id", source);
  cfg.dataset.augment_hflip = kv.get_bool("dataset.augment.hflip", false);
  cfg.dataset.augment_crop_pad = kv.get_int("dataset.augment.random_crop", 0);

  for (const auto& id : kv.section_ids("model")) {
    ModelEntry m;
    m.id = id;
    m.preset = kv.get_or("model." + id + ".preset", "FC-2");
    m.seed = kv.get_u64("model." + id + ".seed", 0);
    const std::string role = kv.get_or("model." + id + ".role", "both");
    if (role == "source")
      m.role = ModelRole::Source;
    else if (role == "target")
      m.role = ModelRole::Target;
    else if (role == "both")
      m.role = ModelRole::Both;
    else
      throw FormatError("model." + id + ".role must be source|target|both");
    m.lineage = parse_lineage(kv.get_or("model." + id + ".lineage", "fresh"));
    cfg.roster.push_back(std::move(m));
  }

  cfg.train = parse_optimizer(kv, "train", OptimizerConfig{});

  for (const auto& id : kv.section_ids("attack")) {
    AttackSweepEntry a;
    a.id = id;
    a.family = attack_family_from_name(kv.get_or("attack." + id + ".family", "pgd"));
    const std::string obj = kv.get_or("attack." + id + ".objective", "non-targeted");
    if (obj == "non-targeted")
      a.objective = Objective::Kind::NonTargeted;
    else if (obj == "targeted")
      a.objective = Objective::Kind::Targeted;
    else
      throw FormatError("attack." + id + ".objective must be non-targeted|targeted");
    a.epsilons = kv.get_double_list("attack." + id + ".epsilon");
    if (a.epsilons.empty()) throw FormatError("attack." + id + ".epsilon is required");
    a.steps = kv.get_int("attack." + id + ".steps", 0);
    a.step_size = kv.get_double("attack." + id + ".step_size", 0.0);
    a.momentum_decay = kv.get_double("attack." + id + ".momentum_decay", 1.0);
    a.seed = kv.get_u64("attack." + id + ".seed", 0);
    cfg.attacks.push_back(std::move(a));
  }

  cfg.eval_sample_n = kv.get_index("eval.sample_n", 2000);
  cfg.eval_dist_images = kv.get_index("eval.dist_images", 1000);
  cfg.eval_seed = kv.get_u64("eval.seed", 0);
  const std::string pool = kv.get_or("eval.correct_pool", "pair");
  if (pool == "roster")
    cfg.dist_pool_roster = true;
  else if (pool == "pair")
    cfg.dist_pool_roster = false;
  else
    throw FormatError("eval.correct_pool must be pair|roster");

  cfg.dist_enabled = kv.get_bool("dist.enabled", true);
  cfg.dist_cap = kv.get_double("dist.cap", 2.0);
  cfg.dist_tol = kv.get_double("dist.tol", 1e-4);

  if (kv.has("grids.images")) {
    for (double v : kv.get_double_list("grids.images"))
      cfg.grids.image_indices.push_back(static_cast<Index>(v));
  }
  cfg.grids.half_extent = kv.get_index("grids.half_extent", 30);
  cfg.grids.resolution = kv.get_index("grids.resolution", 61);
  cfg.grids.seed = kv.get_u64("grids.seed", 0);

  cfg.nonrobust.enabled = kv.get_bool("nonrobust.enabled", false);
  if (cfg.nonrobust.enabled) {
    cfg.nonrobust.f1 = kv.get("nonrobust.f1");
    cfg.nonrobust.f2 = kv.get("nonrobust.f2");
    cfg.nonrobust.epsilon = kv.get_double("nonrobust.epsilon", 2.0);
    cfg.nonrobust.steps = kv.get_int("nonrobust.steps", 100);
    cfg.nonrobust.step_size = kv.get_double("nonrobust.step_size", 0.1);
    cfg.nonrobust.replication = kv.get_int("nonrobust.replication", 1);
    cfg.nonrobust.seed = kv.get_u64("nonrobust.seed", 0);
    if (kv.has("nonrobust.retrain.presets"))
      cfg.nonrobust.retrain_presets = kv.get_string_list("nonrobust.retrain.presets");
    cfg.nonrobust.retrain = parse_optimizer(kv, "nonrobust.retrain", cfg.train);
    cfg.nonrobust.run_random_control = kv.get_bool("nonrobust.random_control", true);
  }

  cfg.ensemble.enabled = kv.get_bool("ensemble.enabled", false);
  if (cfg.ensemble.enabled) {
    cfg.ensemble.source = kv.get("ensemble.source");
    cfg.ensemble.extra = kv.get("ensemble.extra");
    cfg.ensemble.heldout = kv.get("ensemble.heldout");
    cfg.ensemble.epsilon = kv.get_double("ensemble.epsilon", 2.0);
    cfg.ensemble.steps = kv.get_int("ensemble.steps", 10);
    cfg.ensemble.sample_n = kv.get_index("ensemble.sample_n", 2000);
    cfg.ensemble.seed = kv.get_u64("ensemble.seed", 0);
  }

  cfg.output_dir = kv.get_or("outputs.dir", "out");
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> ids;
  for (const auto& m : roster) {
    if (std::find(ids.begin(), ids.end(), m.id) != ids.end())
      throw FormatError("duplicate model id: " + m.id);
    ids.push_back(m.id);
  }
  auto known = [&](const std::string& id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };
  for (const auto& m : roster) {
    if (m.lineage.kind != ModelLineage::Kind::Fresh && !known(m.lineage.parent))
      throw FormatError("model " + m.id + " lineage references unknown id " + m.lineage.parent);
  }
  for (const auto& a : attacks)
    for (double e : a.epsilons)
      if (e <= 0.0) throw FormatError("attack " + a.id + ": epsilon values must be > 0");
  if (nonrobust.enabled) {
    if (!known(nonrobust.f1) || !known(nonrobust.f2))
      throw FormatError("nonrobust.f1/f2 must name roster models");
  }
  if (ensemble.enabled) {
    if (!known(ensemble.source) || !known(ensemble.extra) || !known(ensemble.heldout))
      throw FormatError("ensemble.source/extra/heldout must name roster models");
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(KeyValueConfig::parse_file(path));
}

}  // namespace atlab
