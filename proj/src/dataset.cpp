#include "polymetric/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polymetric/error.hpp"

namespace polymetric {

LabeledDataset::LabeledDataset(Matrix points, std::vector<int> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (static_cast<Eigen::Index>(labels_.size()) != points_.rows()) {
    throw Error(ErrorKind::DimensionMismatch, std::to_string(points_.rows()) + " points but " +
                                                   std::to_string(labels_.size()) + " labels");
  }
  if (!points_.allFinite()) throw Error(ErrorKind::NonFinite, "dataset contains non-finite coordinates");
  for (int l : labels_) {
    if (l < 0) throw Error(ErrorKind::InvalidArgument, "labels must be non-negative, got " + std::to_string(l));
    num_classes_ = std::max(num_classes_, l + 1);
  }
}

std::vector<Eigen::Index> LabeledDataset::class_counts() const {
  std::vector<Eigen::Index> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
  return counts;
}

LabeledDataset LabeledDataset::subset(const std::vector<Eigen::Index>& rows) const {
  Matrix pts(static_cast<Eigen::Index>(rows.size()), dim());
  std::vector<int> lab;
  lab.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    pts.row(static_cast<Eigen::Index>(r)) = points_.row(rows[r]);
    lab.push_back(label(rows[r]));
  }
  return {std::move(pts), std::move(lab)};
}

Standardizer Standardizer::fit(const Matrix& points) {
  Standardizer s;
  const auto n = static_cast<double>(points.rows());
  s.mean = points.colwise().mean().transpose();
  s.scale = Vector::Ones(points.cols());
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double var = (points.col(c).array() - s.mean(c)).square().sum() / n;
    if (var > 0.0) s.scale(c) = std::sqrt(var);
  }
  return s;
}

Vector Standardizer::apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }

Matrix Standardizer::apply(const Matrix& points) const {
  return (points.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix Standardizer::invert(const Matrix& points) const {
  return (points.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

LabeledDataset Standardizer::apply(const LabeledDataset& data) const {
  return {apply(data.points()), data.labels()};
}

}  // namespace polymetric
