#include "atlab/roster.hpp"

#include "atlab/idx_io.hpp"

#include <algorithm>
#include <map>
#include <random>

namespace atlab {

const TrainedModel& Roster::get(const std::string& id) const {
  for (const auto& m : models)
    if (m.entry.id == id) return m;
  throw std::invalid_argument("roster has no model " + id);
}

bool Roster::has(const std::string& id) const {
  return std::any_of(models.begin(), models.end(),
                     [&](const TrainedModel& m) { return m.entry.id == id; });
}

std::vector<std::string> Roster::source_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : models)
    if (m.entry.role != ModelRole::Target) ids.push_back(m.entry.id);
  return ids;
}

std::vector<std::string> Roster::target_ids() const {
  std::vector<std::string> ids;
  for (const auto& m : models)
    if (m.entry.role != ModelRole::Source) ids.push_back(m.entry.id);
  return ids;
}

Roster prepare_roster(const std::vector<ModelEntry>& entries, const LabeledDataset& train,
                      const LabeledDataset& test, const OptimizerConfig& train_cfg,
                      const ProgressFn& progress) {
  // Lineage cycle check over same-init references.
  std::map<std::string, const ModelEntry*> by_id;
  for (const auto& e : entries) by_id[e.id] = &e;
  for (const auto& e : entries) {
    std::vector<std::string> seen{e.id};
    const ModelEntry* cur = &e;
    while (cur->lineage.kind == ModelLineage::Kind::SameInitAs) {
      const auto it = by_id.find(cur->lineage.parent);
      if (it == by_id.end()) throw FormatError("lineage parent missing: " + cur->lineage.parent);
      if (std::find(seen.begin(), seen.end(), it->first) != seen.end())
        throw FormatError("lineage cycle through model " + e.id);
      seen.push_back(it->first);
      cur = it->second;
    }
  }
  for (const auto& e : entries) {
    if (e.lineage.kind == ModelLineage::Kind::Fresh) continue;
    const auto* parent = by_id.at(e.lineage.parent);
    if (parent->lineage.kind == ModelLineage::Kind::EpochSnapshotOf)
      throw FormatError("model " + e.id + ": lineage parent " + parent->id +
                        " is a snapshot and is never trained");
    if (e.lineage.kind == ModelLineage::Kind::EpochSnapshotOf &&
        e.lineage.epoch > train_cfg.epochs)
      throw FormatError("model " + e.id + ": snapshot epoch exceeds training epochs");
  }

  const auto input_shape = train.item_shape();

  // Initial parameters for every trainable entry; same-init copies resolve
  // through the chain to a fresh ancestor's seed-initialized weights.
  std::map<std::string, NetworkModel> initial;
  std::function<const NetworkModel&(const ModelEntry&)> init_of =
      [&](const ModelEntry& e) -> const NetworkModel& {
    const auto found = initial.find(e.id);
    if (found != initial.end()) return found->second;
    NetworkModel m = [&] {
      if (e.lineage.kind == ModelLineage::Kind::SameInitAs) {
        NetworkModel copy = init_of(*by_id.at(e.lineage.parent));
        return copy;
      }
      return build_architecture(e.preset, input_shape, train.num_classes, e.seed);
    }();
    return initial.emplace(e.id, std::move(m)).first->second;
  };

  // Snapshot requests per parent: epoch -> snapshot entry index.
  std::map<std::string, std::vector<std::pair<int, std::size_t>>> snapshots;
  Roster roster;
  roster.models.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    roster.models[i].entry = entries[i];
    if (entries[i].lineage.kind == ModelLineage::Kind::EpochSnapshotOf)
      snapshots[entries[i].lineage.parent].emplace_back(entries[i].lineage.epoch, i);
  }

  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.lineage.kind == ModelLineage::Kind::EpochSnapshotOf) continue;
    if (progress) progress("training " + e.id + " (" + e.preset + ")");
    NetworkModel model = init_of(e);
    OptimizerConfig cfg = train_cfg;
    cfg.seed = e.seed;
    const auto wanted = snapshots.find(e.id);
    EpochCallback cb;
    if (wanted != snapshots.end()) {
      cb = [&](int epoch, const NetworkModel& m, const EpochStats&) {
        for (const auto& [snap_epoch, idx] : wanted->second) {
          if (snap_epoch == epoch) {
            roster.models[idx].model = m;  // parameters at this epoch
            roster.models[idx].model.set_mode(Mode::Eval);
          }
        }
      };
    }
    roster.models[i].history = fit(model, train, cfg, &test, cb);
    roster.models[i].model = std::move(model);
  }
  return roster;
}

LabeledDataset augment_dataset(const LabeledDataset& data, bool hflip, int crop_pad,
                               std::uint64_t seed) {
  if (!hflip && crop_pad <= 0) return data;
  if (data.images.ndim() != 4)
    throw std::invalid_argument("augmentation expects [n,c,h,w] images");
  const Index n = data.size(), c = data.images.dim(1), h = data.images.dim(2),
              w = data.images.dim(3);
  std::vector<Tensor> extra_images;
  std::vector<int> extra_labels;
  std::mt19937_64 rng(seed);
  auto flip_of = [&](Index i) {
    Tensor t = Tensor::zeros({c, h, w});
    const auto src = data.images.row(i);
    for (Index ci = 0; ci < c; ++ci)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
          t.data[ci * h * w + y * w + x] = src[ci * h * w + y * w + (w - 1 - x)];
    return t;
  };
  auto crop_of = [&](Index i, int dy, int dx) {
    // Zero-padded shift by (dy, dx) within +-crop_pad.
    Tensor t = Tensor::zeros({c, h, w});
    const auto src = data.images.row(i);
    for (Index ci = 0; ci < c; ++ci)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const Index sy = y + dy, sx = x + dx;
          if (sy >= 0 && sy < h && sx >= 0 && sx < w)
            t.data[ci * h * w + y * w + x] = src[ci * h * w + sy * w + sx];
        }
    return t;
  };
  for (Index i = 0; i < n; ++i) {
    if (hflip) {
      extra_images.push_back(flip_of(i));
      extra_labels.push_back(data.labels[static_cast<std::size_t>(i)]);
    }
    if (crop_pad > 0) {
      std::uniform_int_distribution<int> jitter(-crop_pad, crop_pad);
      extra_images.push_back(crop_of(i, jitter(rng), jitter(rng)));
      extra_labels.push_back(data.labels[static_cast<std::size_t>(i)]);
    }
  }
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.labels = data.labels;
  out.labels.insert(out.labels.end(), extra_labels.begin(), extra_labels.end());
  const Index total = n + static_cast<Index>(extra_images.size());
  out.images = Tensor::zeros({total, c, h, w});
  const Index item = data.images.row_size();
  out.images.data.segment(0, n * item) = data.images.data;
  for (std::size_t k = 0; k < extra_images.size(); ++k)
    out.images.data.segment((n + static_cast<Index>(k)) * item, item) = extra_images[k].data;
  return out;
}

std::pair<LabeledDataset, LabeledDataset> load_dataset(const DatasetConfig& cfg) {
  std::pair<LabeledDataset, LabeledDataset> out;
  switch (cfg.source) {
    case DatasetConfig::Source::Synthetic:
      out = generate_synthetic(cfg.synthetic);
      break;
    case DatasetConfig::Source::Idx:
      out.first = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
      out.second = load_idx(cfg.idx_test_images, cfg.idx_test_labels, out.first.num_classes);
      break;
    case DatasetConfig::Source::Cifar:
      out.first = load_cifar_binary(cfg.cifar_train);
      out.second = load_cifar_binary(cfg.cifar_test);
      break;
  }
  if (cfg.augment_hflip || cfg.augment_crop_pad > 0)
    out.first = augment_dataset(out.first, cfg.augment_hflip, cfg.augment_crop_pad, 424242);
  return out;
}

}  // namespace atlab
