#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "polymetric/dataset.hpp"
#include "polymetric/linalg.hpp"

namespace polymetric {

struct TargetPair {
  Eigen::Index i;
  Eigen::Index j;
  friend auto operator<=>(const TargetPair&, const TargetPair&) = default;
};

// (i, j) a target pair, k differently labeled than i.
struct Triplet {
  Eigen::Index i;
  Eigen::Index j;
  Eigen::Index k;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletSet {
  std::vector<TargetPair> targets;
  std::vector<Triplet> triplets;
};

enum class ClusteringKind { ByClass, KMeans };

struct Clustering {
  ClusteringKind kind = ClusteringKind::ByClass;
  int clusters = 0;  // only used by KMeans

  static Clustering by_class() { return {}; }
  static Clustering kmeans(int c) { return {ClusteringKind::KMeans, c}; }
  /// Parses "class" or "kmeans:N".
  static Clustering parse(const std::string& text);
  [[nodiscard]] std::string to_string() const;
};

struct LmnnConfig {
  int target_neighbors = 3;
  double mu = 0.5;
  double learning_rate = 1e-3;  // initial trial step of the line search
  int max_iters = 200;
  double tolerance = 1e-7;      // relative objective decrease that counts as converged
  bool enforce_glplus = true;
  Clustering clustering;
  int active_set_refresh = 10;  // iterations between impostor re-scans
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double min_step = 1e-14;
  double singular_epsilon = kDefaultRegularization;
  int kmeans_restarts = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-iterate bookkeeping. objective[0] is the starting value, one entry per
// accepted step after that.
struct TrainingTrace {
  std::vector<double> objective;
  std::vector<double> min_determinant;
  int iterations = 0;
  int glplus_repairs = 0;
  int active_set_refreshes = 0;
  bool converged = false;
  bool no_descent = false;  // line search hit min_step; result is the best iterate
};

struct LmnnResult {
  SquareMatrix transform;
  TrainingTrace trace;
};

struct ClusterMetric {
  SquareMatrix transform;
  int cluster;
};

struct MultiMetricResult {
  std::vector<ClusterMetric> metrics;
  std::vector<int> assignment;  // cluster of every training point
  TrainingTrace trace;
};

/// k same-class Euclidean nearest neighbors per point; ties go to the lower
/// index. Throws Error{ClassTooSmall} if some class has <= k members.
[[nodiscard]] std::vector<TargetPair> find_target_neighbors(const LabeledDataset& data, int k);

/// Triplets whose unit margin is violated under the anchor's metric:
/// d²(i,k) < d²(i,j) + 1. `metrics[assignment[i]]` is the metric of anchor i.
[[nodiscard]] TripletSet build_triplets(const LabeledDataset& data, std::span<const TargetPair> targets,
                                        std::span<const SquareMatrix> metrics, std::span<const int> assignment);

/// Single-metric overload.
[[nodiscard]] TripletSet build_triplets(const LabeledDataset& data, std::span<const TargetPair> targets,
                                        const SquareMatrix& metric);

struct ObjectiveValue {
  double value = 0.0;
  SquareMatrix gradient;  // dJ/dL
};

[[nodiscard]] ObjectiveValue objective_and_gradient(const SquareMatrix& transform, const LabeledDataset& data,
                                                    const TripletSet& triplets, double mu);

struct MultiObjectiveValue {
  double value = 0.0;
  std::vector<SquareMatrix> gradients;
};

/// Sum of per-anchor terms, each measured with the anchor's cluster metric.
[[nodiscard]] MultiObjectiveValue multi_objective_and_gradient(std::span<const SquareMatrix> transforms,
                                                               std::span<const int> assignment,
                                                               const LabeledDataset& data,
                                                               const TripletSet& triplets, double mu);

/// Objective over every (target, impostor) triplet, not just an active set.
[[nodiscard]] double full_objective(std::span<const SquareMatrix> transforms, std::span<const int> assignment,
                                    const LabeledDataset& data, std::span<const TargetPair> targets, double mu);

[[nodiscard]] std::vector<int> cluster_assignment(const LabeledDataset& data, const LmnnConfig& config);

/// Lloyd's algorithm with k-means++ seeding; best inertia over `restarts`.
[[nodiscard]] std::vector<int> kmeans(const Matrix& points, int clusters, int restarts, std::uint64_t seed);

[[nodiscard]] LmnnResult train_lmnn(const LmnnConfig& config, const LabeledDataset& data);

[[nodiscard]] MultiMetricResult train_multi_metric(const LmnnConfig& config, const LabeledDataset& data);

}  // namespace polymetric
