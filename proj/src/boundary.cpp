#include "atlab/boundary.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace atlab {

ArrayX gradient_direction(const NetworkModel& f1, const Tensor& x, int y) {
  Tensor batch = x;
  batch.shape.insert(batch.shape.begin(), 1);
  const auto lg = loss_and_grads(f1, batch, {y}, Wrt::Input);
  ArrayX g = lg.grads.input.data;
  const double norm = std::sqrt((g * g).sum());
  if (norm < 1e-12) throw NumericalError("gradient_direction: zero input gradient");
  return g / norm;
}

namespace {

int predict_along(const NetworkModel& f, const Tensor& x, const ArrayX& v, double t) {
  Tensor probe = x;
  probe.data += t * v;
  return predict_one(f, probe);
}

}  // namespace

DistanceResult boundary_distance(const NetworkModel& f, const Tensor& x, int y, const ArrayX& v,
                                 double cap, double tol) {
  if (cap <= 0.0 || tol <= 0.0) throw std::invalid_argument("boundary_distance: cap, tol > 0");
  const double vnorm = std::sqrt((v * v).sum());
  if (std::abs(vnorm - 1.0) > 1e-9)
    throw std::invalid_argument("boundary_distance: direction must be unit length");
  if (predict_one(f, x) != y)
    throw std::invalid_argument("boundary_distance: x must be classified as y");

  constexpr int kScanSteps = 64;
  const double step = cap / kScanSteps;
  double lo = 0.0, hi = -1.0;
  int hi_label = -1;
  for (int k = 1; k <= kScanSteps; ++k) {
    const double t = k * step;
    const int label = predict_along(f, x, v, t);
    if (label != y) {
      hi = t;
      hi_label = label;
      break;
    }
    lo = t;
  }
  DistanceResult res;
  if (hi < 0.0) {
    res.d = cap;
    res.capped = true;
    return res;
  }
  // Bisect; then re-verify the bracket so that f(x + (d-tol)v) = y holds even
  // if the ray crosses back before hi.
  for (;;) {
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const int label = predict_along(f, x, v, mid);
      if (label != y) {
        hi = mid;
        hi_label = label;
      } else {
        lo = mid;
      }
    }
    const double back = hi - tol;
    if (back <= 0.0) break;
    const int label = predict_along(f, x, v, back);
    if (label == y) break;
    hi = back;
    hi_label = label;
    lo = 0.0;  // restart bracket below the earlier crossing
  }
  res.d = hi;
  res.capped = false;
  res.flips_to = hi_label;
  return res;
}

ModelDistance model_distance(const NetworkModel& f1, const NetworkModel& f2,
                             const LabeledDataset& images, double cap, double tol, int threads) {
  const Index n = images.size();
  if (n == 0) throw std::invalid_argument("model_distance: empty image set");
  if (threads <= 0) threads = default_threads();
  std::vector<double> diffs(static_cast<std::size_t>(n));
  std::vector<int> capped1(static_cast<std::size_t>(n), 0), capped2(static_cast<std::size_t>(n), 0);
  parallel_for(n, threads, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      Tensor x;
      x.shape = images.item_shape();
      x.data = images.images.row(i);
      const int y = images.labels[static_cast<std::size_t>(i)];
      const ArrayX v = gradient_direction(f1, x, y);
      const DistanceResult d1 = boundary_distance(f1, x, y, v, cap, tol);
      const DistanceResult d2 = boundary_distance(f2, x, y, v, cap, tol);
      diffs[static_cast<std::size_t>(i)] = std::abs(d1.d - d2.d);
      capped1[static_cast<std::size_t>(i)] = d1.capped;
      capped2[static_cast<std::size_t>(i)] = d2.capped;
    }
  });
  ModelDistance out;
  out.n_images = n;
  for (Index i = 0; i < n; ++i) {
    out.dist += diffs[static_cast<std::size_t>(i)];
    out.capped_f1 += capped1[static_cast<std::size_t>(i)];
    out.capped_f2 += capped2[static_cast<std::size_t>(i)];
  }
  out.dist /= static_cast<double>(n);
  return out;
}

ArrayX random_orthogonal(const ArrayX& delta1, std::uint64_t seed) {
  const Index dim = delta1.size();
  if (dim < 2) throw std::invalid_argument("random_orthogonal: need dimension >= 2");
  const double norm1 = std::sqrt((delta1 * delta1).sum());
  if (norm1 < 1e-12) throw std::invalid_argument("random_orthogonal: delta1 is zero");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 16; ++attempt) {
    ArrayX g(dim);
    for (Index i = 0; i < dim; ++i) g[i] = normal(rng);
    const double dot = (g * delta1).sum();
    ArrayX ortho = g - (dot / (norm1 * norm1)) * delta1;
    const double norm = std::sqrt((ortho * ortho).sum());
    if (norm > 1e-9) return ortho * (norm1 / norm);
  }
  throw NumericalError("random_orthogonal: degenerate draws");
}

DirectionPair make_direction_pair(const NetworkModel& f1, const Tensor& x, int y,
                                  std::uint64_t seed, double unit_norm) {
  DirectionPair pair;
  pair.unit_norm = unit_norm;
  pair.delta1 = gradient_direction(f1, x, y) * unit_norm;
  pair.delta2 = random_orthogonal(pair.delta1, seed);
  return pair;
}

BoundaryGrid boundary_grid(const NetworkModel& model, const Tensor& x, const DirectionPair& dirs,
                           Index half_extent, Index resolution, int threads) {
  if (resolution < 3 || resolution % 2 == 0)
    throw std::invalid_argument("boundary_grid: resolution must be odd and >= 3");
  if (half_extent < 1) throw std::invalid_argument("boundary_grid: half_extent must be >= 1");
  if (threads <= 0) threads = default_threads();
  BoundaryGrid grid;
  grid.half_extent = half_extent;
  grid.resolution = resolution;
  grid.unit = dirs.unit_norm;
  grid.labels.assign(static_cast<std::size_t>(resolution * resolution), -1);
  parallel_for(resolution, threads, [&](Index rb, Index re) {
    Tensor probe = x;
    for (Index i = rb; i < re; ++i) {
      const double u = grid.axis_units(i);
      for (Index j = 0; j < resolution; ++j) {
        const double v = grid.axis_units(j);
        probe.data = x.data + u * dirs.delta1 + v * dirs.delta2;
        grid.labels[static_cast<std::size_t>(i * resolution + j)] = predict_one(model, probe);
      }
    }
  });
  return grid;
}

OverlayGrid outcome_overlay(const BoundaryGrid& grid_f1, const BoundaryGrid& grid_f2, int y) {
  if (grid_f1.resolution != grid_f2.resolution || grid_f1.half_extent != grid_f2.half_extent ||
      grid_f1.unit != grid_f2.unit)
    throw std::invalid_argument("outcome_overlay: grid geometry mismatch");
  OverlayGrid overlay;
  overlay.half_extent = grid_f1.half_extent;
  overlay.resolution = grid_f1.resolution;
  overlay.regions.resize(grid_f1.labels.size());
  for (std::size_t k = 0; k < grid_f1.labels.size(); ++k) {
    const int l1 = grid_f1.labels[k], l2 = grid_f2.labels[k];
    if (l1 == y)
      overlay.regions[k] = OverlayRegion::NotAdversarial;
    else if (l2 == y)
      overlay.regions[k] = OverlayRegion::Unfooled;
    else if (l2 == l1)
      overlay.regions[k] = OverlayRegion::SameMistake;
    else
      overlay.regions[k] = OverlayRegion::DifferentMistake;
  }
  return overlay;
}

void save_boundary_grid(const BoundaryGrid& grid, const std::string& csv_path,
                        const std::string& json_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw FormatError("cannot write grid CSV: " + csv_path);
  for (Index i = 0; i < grid.resolution; ++i) {
    for (Index j = 0; j < grid.resolution; ++j) {
      if (j) csv << ',';
      csv << grid.at(i, j);
    }
    csv << '\n';
  }
  nlohmann::json j;
  j["model_id"] = grid.model_id;
  j["image_id"] = grid.image_id;
  j["unit"] = grid.unit;
  j["half_extent"] = grid.half_extent;
  j["resolution"] = grid.resolution;
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw FormatError("cannot write grid header: " + json_path);
  js << j.dump(2) << "\n";
}

void save_overlay(const OverlayGrid& overlay, const std::string& csv_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw FormatError("cannot write overlay CSV: " + csv_path);
  for (Index i = 0; i < overlay.resolution; ++i) {
    for (Index j = 0; j < overlay.resolution; ++j) {
      if (j) csv << ',';
      csv << static_cast<int>(overlay.regions[static_cast<std::size_t>(i * overlay.resolution + j)]);
    }
    csv << '\n';
  }
}

}  // namespace atlab
