#pragma once

#include "atlab/network.hpp"

#include <optional>
#include <string>

namespace atlab {

// Unit directions spanning the visualization plane: delta1 along F1's
// non-targeted gradient, delta2 random orthogonal, both scaled to unit_norm.
struct DirectionPair {
  ArrayX delta1;
  ArrayX delta2;
  double unit_norm = 0.02;
};

struct DistanceResult {
  double d = 0.0;
  bool capped = false;
  std::optional<int> flips_to;
};

struct BoundaryGrid {
  std::string model_id;
  Index image_id = -1;
  Index half_extent = 30;
  Index resolution = 61;  // points per axis, odd
  double unit = 0.02;
  std::vector<int> labels;  // row-major [resolution x resolution]

  int at(Index i, Index j) const { return labels[static_cast<std::size_t>(i * resolution + j)]; }
  // Axis value in units for grid position k (0-based): -half_extent ... +half_extent.
  double axis_units(Index k) const {
    return -static_cast<double>(half_extent) +
           2.0 * static_cast<double>(half_extent) * static_cast<double>(k) /
               static_cast<double>(resolution - 1);
  }
};

enum class OverlayRegion { NotAdversarial, Unfooled, DifferentMistake, SameMistake };

struct OverlayGrid {
  Index half_extent = 30;
  Index resolution = 61;
  std::vector<OverlayRegion> regions;  // row-major
};

// v = grad_x L(x, y) / ||grad||_2 for the non-targeted loss of f1; errors on a
// zero gradient.
ArrayX gradient_direction(const NetworkModel& f1, const Tensor& x, int y);

// Smallest t in (0, cap] with f(x + t*v) != y: coarse scan (cap/64 steps) then
// bisection to tol. Probe points are not pixel-clipped; the measurement is of
// the function along the ray. Returns capped=true with d=cap when no flip.
DistanceResult boundary_distance(const NetworkModel& f, const Tensor& x, int y, const ArrayX& v,
                                 double cap = 2.0, double tol = 1e-4);

struct ModelDistance {
  double dist = 0.0;
  Index capped_f1 = 0;
  Index capped_f2 = 0;
  Index n_images = 0;
};

// Eq-style model distance: mean over images of |d(F1,x) - d(F2,x)| along F1's
// per-image gradient direction. Capped probes contribute the cap value.
ModelDistance model_distance(const NetworkModel& f1, const NetworkModel& f2,
                             const LabeledDataset& images, double cap = 2.0, double tol = 1e-4,
                             int threads = 0);

// Gaussian draw projected orthogonal to delta1 and rescaled to ||delta1||.
ArrayX random_orthogonal(const ArrayX& delta1, std::uint64_t seed);

DirectionPair make_direction_pair(const NetworkModel& f1, const Tensor& x, int y,
                                  std::uint64_t seed, double unit_norm = 0.02);

// labels[i][j] = predict(model, x + u_i*delta1 + v_j*delta2) over the square
// [-half_extent, half_extent] in units of the pair's norm.
BoundaryGrid boundary_grid(const NetworkModel& model, const Tensor& x, const DirectionPair& dirs,
                           Index half_extent = 30, Index resolution = 61, int threads = 0);

// Region per cell: NotAdversarial where F1 is not fooled, otherwise F2's
// class-aware outcome against true label y.
OverlayGrid outcome_overlay(const BoundaryGrid& grid_f1, const BoundaryGrid& grid_f2, int y);

// CSV matrix plus JSON header (model id, image id, unit, extent).
void save_boundary_grid(const BoundaryGrid& grid, const std::string& csv_path,
                        const std::string& json_path);
void save_overlay(const OverlayGrid& overlay, const std::string& csv_path);

}  // namespace atlab
