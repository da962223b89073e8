#include "polymetric/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "polymetric/error.hpp"

namespace polymetric {

void StripeParams::validate() const {
  if (stripes < 1) throw Error(ErrorKind::InvalidArgument, "need at least one stripe");
  if (!(stripe_width > 0.0) || !(height > 0.0)) throw Error(ErrorKind::InvalidArgument, "stripe size must be positive");
  if (!(density0 > 0.0) || !(density1 > 0.0)) throw Error(ErrorKind::InvalidArgument, "densities must be positive");
  if (!(noise >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise must be non-negative");
}

int stripe_label(const StripeParams& params, double x) {
  const auto band = static_cast<long>(std::floor(x / params.stripe_width));
  return static_cast<int>(((band % 2) + 2) % 2);
}

StripeDataset synth_stripes(const StripeParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const double area = params.stripe_width * params.height;
  const auto count0 = static_cast<long>(std::lround(params.density0 * area));
  const auto count1 = static_cast<long>(std::lround(params.density1 * area));

  std::vector<Eigen::Vector2d> pts;
  std::vector<int> labels;
  for (int s = 0; s < params.stripes; ++s) {
    const int label = s % 2;
    const long count = label == 0 ? count0 : count1;
    const double x0 = s * params.stripe_width;
    for (long i = 0; i < count; ++i) {
      Eigen::Vector2d p(x0 + params.stripe_width * unit(rng), params.height * unit(rng));
      if (params.noise > 0.0) p += params.noise * Eigen::Vector2d(jitter(rng), jitter(rng));
      pts.push_back(p);
      labels.push_back(label);
    }
  }

  Matrix m(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();

  StripeDataset out{LabeledDataset(std::move(m), std::move(labels)), {}, {}};
  for (int s = 1; s < params.stripes; ++s) out.boundaries.push_back(s * params.stripe_width);
  out.extent = GridSpec{0.0, params.stripes * params.stripe_width, 2, 0.0, params.height, 2};
  return out;
}

namespace {

ComponentTransform centered(const Matrix& linear, const Vector& center, double sigma) {
  return ComponentTransform::anchored(SquareMatrix(linear), center, sigma);
}

void check_plane(const Vector& a, const Vector& b) {
  if (a.size() != 2 || b.size() != 2) throw Error(ErrorKind::DimensionMismatch, "synthetic atlases are 2-D");
}

}  // namespace

FusionAtlas synth_rotation_atlas(double theta, const Vector& first, const Vector& second, double sigma, int steps) {
  check_plane(first, second);
  if (!(std::abs(theta) < std::numbers::pi)) {
    throw Error(ErrorKind::NonPrincipalLog, "rotation angle " + std::to_string(theta) + " has no principal log");
  }
  auto rot = [](double t) {
    Matrix r(2, 2);
    r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
    return r;
  };
  return FusionAtlas({centered(rot(theta), first, sigma), centered(rot(-theta), second, sigma)}, steps);
}

FusionAtlas synth_shear_atlas(double shear, const Vector& first, const Vector& second, double sigma, int steps) {
  check_plane(first, second);
  Matrix pos(2, 2);
  pos << 1.0, shear, 0.0, 1.0;
  Matrix neg(2, 2);
  neg << 1.0, -shear, 0.0, 1.0;
  return FusionAtlas({centered(pos, first, sigma), centered(neg, second, sigma)}, steps);
}

}  // namespace polymetric
