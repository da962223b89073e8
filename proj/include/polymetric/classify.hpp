#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "polymetric/dataset.hpp"
#include "polymetric/fusion.hpp"

namespace polymetric {

/// ‖forward(xi) - forward(xj)‖₂ under the fused flow.
[[nodiscard]] double gpi_distance(const FusionAtlas& atlas, const Vector& xi, const Vector& xj);

/// (xi - xj)ᵀ M (xi - xj).
[[nodiscard]] double mahalanobis_sq(const SquareMatrix& metric, const Vector& xi, const Vector& xj);

/// sqrt(Σ_k w_k · d²_{M_k}(xi, xj)). `metrics` are Mahalanobis matrices M_k.
[[nodiscard]] double plml_distance(const Vector& weights, std::span<const SquareMatrix> metrics, const Vector& xi,
                                   const Vector& xj);

using PairDistance = std::function<double(const Vector&, const Vector&)>;

/// Majority label among the k smallest distances. Distance ties go to the
/// lower index, vote ties to the smaller label.
[[nodiscard]] int knn_vote(std::span<const int> labels, std::span<const double> distances, int k);

/// Throws Error{EmptyTrainingSet} on an empty set, InvalidArgument if k > n.
[[nodiscard]] int knn_classify(const LabeledDataset& train, const Vector& query, int k, const PairDistance& distance);

using Predictor = std::function<int(const Vector&)>;

/// k-NN in the image of `embed`: training images are computed once.
[[nodiscard]] Predictor embedded_knn(const LabeledDataset& train, int k, PointMap embed);

/// Piecewise-linear k-NN: the distance to training point j is measured with
/// the metric of j's cluster, ‖L_{c(j)} (q - x_j)‖.
[[nodiscard]] Predictor piecewise_knn(const LabeledDataset& train, int k, std::vector<SquareMatrix> transforms,
                                      std::vector<int> assignment);

/// k-NN under plml_distance with radial weights evaluated at the query and
/// M_k = L_kᵀ L_k from the atlas components' linear blocks.
[[nodiscard]] Predictor plml_knn(const LabeledDataset& train, int k, FusionAtlas atlas);

[[nodiscard]] std::vector<int> predict_all(const Predictor& predict, const Matrix& queries);

[[nodiscard]] double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct EvaluationReport {
  std::vector<double> per_fold_accuracy;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single fold
  double max = 0.0;
  double min = 0.0;

  static EvaluationReport from_folds(std::vector<double> accuracies);
};

/// Fold index of every sample. Each class is shuffled with `seed` and dealt
/// round-robin, continuing where the previous class stopped.
/// Throws Error{ClassTooSmall} if a present class has fewer than `folds` members.
[[nodiscard]] std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

using Pipeline = std::function<Predictor(const LabeledDataset&)>;

/// Trains on all folds but one and scores the held-out fold, for every fold.
/// Folds run concurrently when `parallel`; `pipeline` must then be safe to
/// call from several threads.
[[nodiscard]] EvaluationReport cross_validate(const LabeledDataset& data, int folds, const Pipeline& pipeline,
                                              std::uint64_t seed, bool parallel = true);

/// Same with a precomputed fold assignment (values in [0, folds)).
[[nodiscard]] EvaluationReport cross_validate(const LabeledDataset& data, std::span<const int> fold_of, int folds,
                                              const Pipeline& pipeline, bool parallel = true);

/// Predicted label at every point of a 2-D grid (x fastest).
[[nodiscard]] std::vector<int> boundary_grid(const Predictor& predict, const GridSpec& grid);

[[nodiscard]] std::vector<int> boundary_grid(const LabeledDataset& train, int k, const PairDistance& distance,
                                             const GridSpec& grid);

/// Midpoints between 4-neighbor grid cells whose labels differ.
[[nodiscard]] std::vector<Vector> label_flip_locus(std::span<const int> labels, const GridSpec& grid);

/// Mean distance from the label-flip locus to the nearest vertical boundary
/// line x = b. Infinite if the grid has no flips.
[[nodiscard]] double boundary_shift(std::span<const int> labels, const GridSpec& grid,
                                    std::span<const double> boundaries);

}  // namespace polymetric
