#pragma once

#include <optional>
#include <string>
#include <vector>

#include "polymetric/classify.hpp"
#include "polymetric/lmnn.hpp"

namespace polymetric {

// How the per-cluster metrics become one classifier.
//   Velocity      fused stationary velocity flow, k-NN on forward images
//   Displacement  weighted average of component destinations
//   Plml          weighted sum of squared Mahalanobis distances
//   None          piecewise metrics: each training point keeps its cluster's map
enum class FusionKind { Velocity, Displacement, Plml, None };

[[nodiscard]] FusionKind parse_fusion(const std::string& text);
[[nodiscard]] std::string to_string(FusionKind kind);

struct ModelConfig {
  LmnnConfig lmnn;
  FusionKind fusion = FusionKind::Velocity;
  int k = 3;
  int steps = FusionAtlas::kDefaultSteps;
  double sigma = 0.0;  // <= 0 picks each cluster's RMS radius
  bool standardize = true;

  void validate() const;
};

struct TrainedModel {
  ModelConfig config;
  std::optional<Standardizer> standardizer;
  LabeledDataset train;         // in model coordinates (standardized if enabled)
  std::vector<int> assignment;  // cluster of every training point
  std::vector<int> component_cluster;
  std::vector<ComponentTransform> components;
  TrainingTrace trace;          // not persisted

  [[nodiscard]] FusionAtlas atlas() const { return FusionAtlas(components, config.steps); }
  /// Linear block of each cluster's map, indexed by cluster id.
  [[nodiscard]] std::vector<SquareMatrix> cluster_transforms() const;
  /// Query in raw coordinates -> model coordinates.
  [[nodiscard]] Vector to_model(const Vector& x) const;
};

[[nodiscard]] TrainedModel fit_model(const ModelConfig& config, const LabeledDataset& data);

/// Predictor over raw-coordinate queries.
[[nodiscard]] Predictor make_predictor(const TrainedModel& model);

/// fit_model followed by make_predictor, for cross_validate.
[[nodiscard]] Pipeline model_pipeline(ModelConfig config);

/// Plain Euclidean k-NN on raw coordinates.
[[nodiscard]] Pipeline euclidean_pipeline(int k);

}  // namespace polymetric
