#pragma once

#include <functional>
#include <span>
#include <vector>

#include "polymetric/linalg.hpp"

namespace polymetric {

/// One local affine transform in homogeneous form, its cached principal log,
/// and the radial weight parameters (center, attenuation sigma).
class ComponentTransform {
 public:
  /// `homogeneous` is (d+1)x(d+1) with bottom row (0,...,0,1) and a linear
  /// block of positive determinant.
  ComponentTransform(SquareMatrix homogeneous, Vector center, double sigma);

  /// Embeds a linear map anchored at its center: x -> c + L (x - c).
  static ComponentTransform anchored(const SquareMatrix& linear, const Vector& center, double sigma);

  [[nodiscard]] Eigen::Index dim() const noexcept { return center_.size(); }
  [[nodiscard]] const SquareMatrix& homogeneous() const noexcept { return linear_; }
  [[nodiscard]] const SquareMatrix& log_homogeneous() const noexcept { return log_linear_; }
  [[nodiscard]] Matrix linear_block() const { return linear_.matrix().topLeftCorner(dim(), dim()); }
  [[nodiscard]] const Vector& center() const noexcept { return center_; }
  [[nodiscard]] double sigma() const noexcept { return sigma_; }

  /// L · (x, 1), top d rows.
  [[nodiscard]] Vector apply(const Vector& x) const;

 private:
  SquareMatrix linear_;
  SquareMatrix log_linear_;
  Vector center_;
  double sigma_;
};

enum class FlowDirection { Forward, Backward };

/// Immutable set of components plus integration settings.
class FusionAtlas {
 public:
  static constexpr int kDefaultSteps = 32;
  static constexpr double kDefaultWeightFloor = 1e-300;

  explicit FusionAtlas(std::vector<ComponentTransform> components, int steps = kDefaultSteps,
                       double weight_floor = kDefaultWeightFloor);

  [[nodiscard]] const std::vector<ComponentTransform>& components() const noexcept { return components_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return components_.front().dim(); }
  [[nodiscard]] int steps() const noexcept { return steps_; }
  [[nodiscard]] double weight_floor() const noexcept { return weight_floor_; }

  [[nodiscard]] FusionAtlas with_steps(int steps) const { return FusionAtlas(components_, steps, weight_floor_); }

 private:
  std::vector<ComponentTransform> components_;
  int steps_;
  double weight_floor_;
};

/// w_k(x) = 1 / (1 + (|x - c_k| / sigma_k)^2), normalized to sum to one.
[[nodiscard]] Vector normalized_weights(const FusionAtlas& atlas, const Vector& x);

/// Stationary velocity log(L_k) · (x, 1), top d rows.
[[nodiscard]] Vector component_velocity(const ComponentTransform& comp, const Vector& x);

[[nodiscard]] Vector fused_velocity(const FusionAtlas& atlas, const Vector& x);

/// Fixed-step RK4 over unit time of x' = ±fused_velocity(x).
/// Throws Error{NonFinite} if the trajectory leaves the finite range.
[[nodiscard]] Vector integrate_flow(const FusionAtlas& atlas, const Vector& x0,
                                    FlowDirection direction = FlowDirection::Forward);

/// Weighted average of component destinations (no integration). Not
/// injective in general.
[[nodiscard]] Vector displacement_fusion(const FusionAtlas& atlas, const Vector& x);

using PointMap = std::function<Vector(const Vector&)>;

/// Central-difference Jacobian determinant of `map` at x with step h.
[[nodiscard]] double jacobian_determinant(const PointMap& map, const Vector& x, double h);

/// detJ of the forward warp at every grid point.
[[nodiscard]] std::vector<double> jacobian_grid(const FusionAtlas& atlas, std::span<const Vector> grid, double h);

/// detJ of the displacement-fusion map at every grid point.
[[nodiscard]] std::vector<double> displacement_jacobian_grid(const FusionAtlas& atlas, std::span<const Vector> grid,
                                                             double h);

/// Regular 2-D lattice, x varying fastest.
struct GridSpec {
  double xmin = 0.0;
  double xmax = 1.0;
  int nx = 2;
  double ymin = 0.0;
  double ymax = 1.0;
  int ny = 2;

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  [[nodiscard]] double dx() const noexcept { return nx > 1 ? (xmax - xmin) / (nx - 1) : 0.0; }
  [[nodiscard]] double dy() const noexcept { return ny > 1 ? (ymax - ymin) / (ny - 1) : 0.0; }
  void validate() const;
};

[[nodiscard]] std::vector<Vector> grid_points(const GridSpec& spec);

/// Root-mean-square distance of the rows of `points` to `center`.
[[nodiscard]] double rms_radius(const Matrix& points, const Vector& center);

/// Components from per-cluster linear maps: center = cluster mean, sigma =
/// `sigma` if positive, else the cluster's RMS radius.
[[nodiscard]] FusionAtlas atlas_from_clusters(const Matrix& points, std::span<const int> assignment,
                                              std::span<const SquareMatrix> linear_maps, double sigma,
                                              int steps = FusionAtlas::kDefaultSteps);

}  // namespace polymetric
