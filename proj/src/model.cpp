#include "polymetric/model.hpp"

#include <algorithm>
#include <cmath>

#include "polymetric/error.hpp"

namespace polymetric {

FusionKind parse_fusion(const std::string& text) {
  if (text == "velocity") return FusionKind::Velocity;
  if (text == "displacement") return FusionKind::Displacement;
  if (text == "plml") return FusionKind::Plml;
  if (text == "none") return FusionKind::None;
  throw Error(ErrorKind::InvalidArgument,
              "unknown fusion '" + text + "', expected velocity, displacement, plml or none");
}

std::string to_string(FusionKind kind) {
  switch (kind) {
    case FusionKind::Velocity: return "velocity";
    case FusionKind::Displacement: return "displacement";
    case FusionKind::Plml: return "plml";
    case FusionKind::None: return "none";
  }
  return "velocity";
}

void ModelConfig::validate() const {
  lmnn.validate();
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be positive");
  if (steps < 1) throw Error(ErrorKind::InvalidArgument, "steps must be positive");
  if (!std::isfinite(sigma)) throw Error(ErrorKind::InvalidArgument, "sigma must be finite");
}

std::vector<SquareMatrix> TrainedModel::cluster_transforms() const {
  const int top = component_cluster.empty() ? 0 : *std::max_element(component_cluster.begin(), component_cluster.end());
  std::vector<SquareMatrix> out(static_cast<std::size_t>(top) + 1, SquareMatrix::identity(train.dim()));
  for (std::size_t c = 0; c < components.size(); ++c) {
    out[static_cast<std::size_t>(component_cluster[c])] = SquareMatrix(components[c].linear_block());
  }
  return out;
}

Vector TrainedModel::to_model(const Vector& x) const {
  if (x.size() != train.dim()) throw Error(ErrorKind::DimensionMismatch, "query dimension differs from model");
  return standardizer ? standardizer->apply(x) : x;
}

TrainedModel fit_model(const ModelConfig& config, const LabeledDataset& data) {
  config.validate();
  if (data.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training data");
  TrainedModel m;
  m.config = config;
  if (config.standardize) m.standardizer = Standardizer::fit(data.points());
  m.train = m.standardizer ? m.standardizer->apply(data) : data;

  MultiMetricResult fit = train_multi_metric(config.lmnn, m.train);
  m.assignment = std::move(fit.assignment);
  m.trace = std::move(fit.trace);

  std::vector<SquareMatrix> maps;
  maps.reserve(fit.metrics.size());
  for (const auto& cm : fit.metrics) maps.push_back(cm.transform);
  const FusionAtlas atlas = atlas_from_clusters(m.train.points(), m.assignment, maps, config.sigma, config.steps);
  m.components = atlas.components();
  // atlas_from_clusters skips empty clusters; recover which cluster each
  // surviving component came from.
  for (std::size_t c = 0; c < maps.size(); ++c) {
    if (std::find(m.assignment.begin(), m.assignment.end(), static_cast<int>(c)) != m.assignment.end()) {
      m.component_cluster.push_back(static_cast<int>(c));
    }
  }
  return m;
}

Predictor make_predictor(const TrainedModel& model) {
  const int k = model.config.k;
  Predictor inner;
  switch (model.config.fusion) {
    case FusionKind::Velocity:
      inner = embedded_knn(model.train, k, [atlas = model.atlas()](const Vector& x) { return integrate_flow(atlas, x); });
      break;
    case FusionKind::Displacement:
      inner = embedded_knn(model.train, k,
                           [atlas = model.atlas()](const Vector& x) { return displacement_fusion(atlas, x); });
      break;
    case FusionKind::Plml:
      inner = plml_knn(model.train, k, model.atlas());
      break;
    case FusionKind::None:
      inner = piecewise_knn(model.train, k, model.cluster_transforms(), model.assignment);
      break;
  }
  return [inner = std::move(inner), standardizer = model.standardizer, d = model.train.dim()](const Vector& x) {
    if (x.size() != d) throw Error(ErrorKind::DimensionMismatch, "query dimension differs from model");
    return inner(standardizer ? standardizer->apply(x) : x);
  };
}

Pipeline model_pipeline(ModelConfig config) {
  return [config = std::move(config)](const LabeledDataset& train) { return make_predictor(fit_model(config, train)); };
}

Pipeline euclidean_pipeline(int k) {
  return [k](const LabeledDataset& train) { return embedded_knn(train, k, [](const Vector& x) { return x; }); };
}

}  // namespace polymetric
