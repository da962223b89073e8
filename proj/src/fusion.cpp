#include "polymetric/fusion.hpp"

#include <cmath>
#include <string>

#include "polymetric/error.hpp"

namespace polymetric {

namespace {

using Index = Eigen::Index;

void check_point(const FusionAtlas& atlas, const Vector& x) {
  if (x.size() != atlas.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "point has " + std::to_string(x.size()) + " coordinates, atlas expects " + std::to_string(atlas.dim()));
  }
}

std::vector<double> determinant_grid(const PointMap& map, std::span<const Vector> grid, double h) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& p : grid) out.push_back(jacobian_determinant(map, p, h));
  return out;
}

}  // namespace

ComponentTransform::ComponentTransform(SquareMatrix homogeneous, Vector center, double sigma)
    : linear_(std::move(homogeneous)), center_(std::move(center)), sigma_(sigma) {
  const Index d = center_.size();
  if (d < 1 || linear_.dim() != d + 1) {
    throw Error(ErrorKind::DimensionMismatch, "homogeneous matrix must be (d+1)x(d+1) for a d-dimensional center");
  }
  if (!center_.allFinite()) throw Error(ErrorKind::NonFinite, "component center must be finite");
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) {
    throw Error(ErrorKind::InvalidArgument, "component sigma must be positive and finite");
  }
  const Matrix& m = linear_.matrix();
  for (Index c = 0; c < d; ++c) {
    if (m(d, c) != 0.0) throw Error(ErrorKind::InvalidArgument, "homogeneous bottom row must be (0, ..., 0, 1)");
  }
  if (m(d, d) != 1.0) throw Error(ErrorKind::InvalidArgument, "homogeneous bottom row must be (0, ..., 0, 1)");
  if (!(m.topLeftCorner(d, d).determinant() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "component linear block must have positive determinant");
  }
  log_linear_ = mat_log(linear_);
}

ComponentTransform ComponentTransform::anchored(const SquareMatrix& linear, const Vector& center, double sigma) {
  const Index d = linear.dim();
  if (center.size() != d) throw Error(ErrorKind::DimensionMismatch, "center size differs from matrix size");
  Matrix h = Matrix::Identity(d + 1, d + 1);
  h.topLeftCorner(d, d) = linear.matrix();
  h.topRightCorner(d, 1) = center - linear.matrix() * center;
  return {SquareMatrix(std::move(h)), center, sigma};
}

Vector ComponentTransform::apply(const Vector& x) const {
  const Index d = dim();
  const Matrix& m = linear_.matrix();
  return m.topLeftCorner(d, d) * x + m.topRightCorner(d, 1);
}

FusionAtlas::FusionAtlas(std::vector<ComponentTransform> components, int steps, double weight_floor)
    : components_(std::move(components)), steps_(steps), weight_floor_(weight_floor) {
  if (components_.empty()) throw Error(ErrorKind::InvalidArgument, "atlas needs at least one component");
  if (steps_ < 1) throw Error(ErrorKind::InvalidArgument, "atlas needs at least one integration step");
  if (!(weight_floor_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "weight floor must be positive");
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) {
      throw Error(ErrorKind::DimensionMismatch, "atlas components differ in dimension");
    }
  }
}

Vector normalized_weights(const FusionAtlas& atlas, const Vector& x) {
  check_point(atlas, x);
  const auto& comps = atlas.components();
  const auto q = static_cast<Index>(comps.size());
  Vector r(q);
  for (Index k = 0; k < q; ++k) {
    const auto& c = comps[static_cast<std::size_t>(k)];
    r(k) = (x - c.center()).stableNorm() / c.sigma();
  }
  const Vector w = (1.0 + r.array().square()).inverse().matrix();
  if (w.minCoeff() > 0.0) return w / std::max(w.sum(), atlas.weight_floor());

  // Far field: some raw weight underflowed. Normalize in the log domain,
  // log(1 + r^2) ~ 2 log r once r^2 overflows; log r is taken from the
  // unscaled distance so r itself may be infinite.
  Vector neg_log(q);
  for (Index k = 0; k < q; ++k) {
    const auto& c = comps[static_cast<std::size_t>(k)];
    neg_log(k) = r(k) > 1e150 ? -2.0 * (std::log((x - c.center()).stableNorm()) - std::log(c.sigma()))
                              : -std::log1p(r(k) * r(k));
  }
  if (!neg_log.allFinite()) throw Error(ErrorKind::NonFinite, "point is outside the finite range");
  const Vector e = (neg_log.array() - neg_log.maxCoeff()).exp().matrix();
  return e / e.sum();
}

Vector component_velocity(const ComponentTransform& comp, const Vector& x) {
  const Index d = comp.dim();
  const Matrix& g = comp.log_homogeneous().matrix();
  return g.topLeftCorner(d, d) * x + g.topRightCorner(d, 1);
}

Vector fused_velocity(const FusionAtlas& atlas, const Vector& x) {
  const Vector w = normalized_weights(atlas, x);
  Vector v = Vector::Zero(atlas.dim());
  const auto& comps = atlas.components();
  for (std::size_t k = 0; k < comps.size(); ++k) v += w(static_cast<Index>(k)) * component_velocity(comps[k], x);
  return v;
}

Vector integrate_flow(const FusionAtlas& atlas, const Vector& x0, FlowDirection direction) {
  check_point(atlas, x0);
  const double h = (direction == FlowDirection::Forward ? 1.0 : -1.0) / atlas.steps();
  Vector x = x0;
  for (int s = 0; s < atlas.steps(); ++s) {
    const Vector k1 = fused_velocity(atlas, x);
    const Vector k2 = fused_velocity(atlas, x + 0.5 * h * k1);
    const Vector k3 = fused_velocity(atlas, x + 0.5 * h * k2);
    const Vector k4 = fused_velocity(atlas, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite()) {
      throw Error(ErrorKind::NonFinite, "flow diverged after " + std::to_string(s + 1) + " of " +
                                            std::to_string(atlas.steps()) + " steps");
    }
  }
  return x;
}

Vector displacement_fusion(const FusionAtlas& atlas, const Vector& x) {
  const Vector w = normalized_weights(atlas, x);
  Vector out = Vector::Zero(atlas.dim());
  const auto& comps = atlas.components();
  for (std::size_t k = 0; k < comps.size(); ++k) out += w(static_cast<Index>(k)) * comps[k].apply(x);
  return out;
}

double jacobian_determinant(const PointMap& map, const Vector& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  const Index d = x.size();
  Matrix jac(d, d);
  for (Index c = 0; c < d; ++c) {
    Vector xp = x;
    Vector xm = x;
    xp(c) += h;
    xm(c) -= h;
    jac.col(c) = (map(xp) - map(xm)) / (2.0 * h);
  }
  return jac.determinant();
}

std::vector<double> jacobian_grid(const FusionAtlas& atlas, std::span<const Vector> grid, double h) {
  return determinant_grid([&atlas](const Vector& p) { return integrate_flow(atlas, p); }, grid, h);
}

std::vector<double> displacement_jacobian_grid(const FusionAtlas& atlas, std::span<const Vector> grid, double h) {
  return determinant_grid([&atlas](const Vector& p) { return displacement_fusion(atlas, p); }, grid, h);
}

void GridSpec::validate() const {
  if (nx < 1 || ny < 1) throw Error(ErrorKind::InvalidArgument, "grid needs at least one point per axis");
  if (!(xmax >= xmin) || !(ymax >= ymin)) throw Error(ErrorKind::InvalidArgument, "grid bounds must be ordered");
  if (!std::isfinite(xmin) || !std::isfinite(xmax) || !std::isfinite(ymin) || !std::isfinite(ymax)) {
    throw Error(ErrorKind::NonFinite, "grid bounds must be finite");
  }
}

std::vector<Vector> grid_points(const GridSpec& spec) {
  spec.validate();
  std::vector<Vector> pts;
  pts.reserve(spec.size());
  for (int iy = 0; iy < spec.ny; ++iy) {
    for (int ix = 0; ix < spec.nx; ++ix) {
      pts.push_back(Eigen::Vector2d(spec.xmin + ix * spec.dx(), spec.ymin + iy * spec.dy()));
    }
  }
  return pts;
}

double rms_radius(const Matrix& points, const Vector& center) {
  if (points.rows() == 0) return 0.0;
  return std::sqrt((points.rowwise() - center.transpose()).rowwise().squaredNorm().mean());
}

FusionAtlas atlas_from_clusters(const Matrix& points, std::span<const int> assignment,
                                std::span<const SquareMatrix> linear_maps, double sigma, int steps) {
  if (static_cast<Index>(assignment.size()) != points.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "cluster assignment size differs from point count");
  }
  std::vector<ComponentTransform> comps;
  for (std::size_t c = 0; c < linear_maps.size(); ++c) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == static_cast<int>(c)) rows.push_back(static_cast<Index>(i));
    if (rows.empty()) continue;
    Matrix members(static_cast<Index>(rows.size()), points.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) members.row(static_cast<Index>(r)) = points.row(rows[r]);
    const Vector center = members.colwise().mean().transpose();
    double s = sigma > 0.0 ? sigma : rms_radius(members, center);
    if (!(s > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "cluster " + std::to_string(c) + " has zero radius; pass an explicit sigma");
    }
    comps.push_back(ComponentTransform::anchored(linear_maps[c], center, s));
  }
  return FusionAtlas(std::move(comps), steps);
}

}  // namespace polymetric
