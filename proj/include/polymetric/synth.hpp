#pragma once

#include <cstdint>
#include <vector>

#include "polymetric/dataset.hpp"
#include "polymetric/fusion.hpp"

namespace polymetric {

// Vertical stripes of equal width laid side by side along x, alternating
// class 0 / class 1 from the left. Per-class densities are points per unit
// area; class 0 is the sparse class by default.
struct StripeParams {
  int stripes = 4;
  double stripe_width = 1.0;
  double height = 4.0;
  double density0 = 10.0;
  double density1 = 20.0;
  double noise = 0.0;  // std of Gaussian jitter added to both coordinates
  std::uint64_t seed = 0;

  void validate() const;
};

struct StripeDataset {
  LabeledDataset data;
  std::vector<double> boundaries;  // interior stripe edges (x positions)
  GridSpec extent;                 // bounding box of the stripes
};

[[nodiscard]] StripeDataset synth_stripes(const StripeParams& params);

/// Label the stripe layout assigns to an x coordinate.
[[nodiscard]] int stripe_label(const StripeParams& params, double x);

/// Two-component 2-D atlas: rotation by +theta about `first`, -theta about
/// `second`. Throws Error{NonPrincipalLog} for |theta| >= pi.
[[nodiscard]] FusionAtlas synth_rotation_atlas(double theta, const Vector& first, const Vector& second, double sigma,
                                               int steps = FusionAtlas::kDefaultSteps);

/// Two-component 2-D atlas of opposed horizontal shears x += ±s·(y - c_y).
[[nodiscard]] FusionAtlas synth_shear_atlas(double shear, const Vector& first, const Vector& second, double sigma,
                                            int steps = FusionAtlas::kDefaultSteps);

}  // namespace polymetric
