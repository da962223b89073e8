#pragma once

#include <cstddef>
#include <vector>

#include "polymetric/linalg.hpp"

namespace polymetric {

// n points in R^d (one per row) with integer class labels in [0, C).
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix points, std::vector<int> labels);

  [[nodiscard]] Eigen::Index size() const noexcept { return points_.rows(); }
  [[nodiscard]] Eigen::Index dim() const noexcept { return points_.cols(); }
  [[nodiscard]] bool empty() const noexcept { return points_.rows() == 0; }

  [[nodiscard]] const Matrix& points() const noexcept { return points_; }
  [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
  [[nodiscard]] Vector point(Eigen::Index i) const { return points_.row(i).transpose(); }
  [[nodiscard]] int label(Eigen::Index i) const { return labels_[static_cast<std::size_t>(i)]; }

  /// max label + 1 (0 for an empty set).
  [[nodiscard]] int num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] std::vector<Eigen::Index> class_counts() const;

  [[nodiscard]] LabeledDataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Matrix points_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

// Per-feature z-scoring. Constant features keep scale 1 so they map to 0.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& points);
  [[nodiscard]] Vector apply(const Vector& x) const;
  [[nodiscard]] Matrix apply(const Matrix& points) const;
  [[nodiscard]] Matrix invert(const Matrix& points) const;
  [[nodiscard]] LabeledDataset apply(const LabeledDataset& data) const;
};

}  // namespace polymetric
