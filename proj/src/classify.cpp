#include "polymetric/classify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "polymetric/error.hpp"

namespace polymetric {

namespace {

using Index = Eigen::Index;

void check_pair(const Vector& xi, const Vector& xj) {
  if (xi.size() != xj.size()) throw Error(ErrorKind::DimensionMismatch, "points differ in dimension");
}

void check_k(Index n, int k) {
  if (n == 0) throw Error(ErrorKind::EmptyTrainingSet, "k-NN needs at least one training point");
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidArgument,
                "k must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  }
}

}  // namespace

double gpi_distance(const FusionAtlas& atlas, const Vector& xi, const Vector& xj) {
  check_pair(xi, xj);
  return (integrate_flow(atlas, xi) - integrate_flow(atlas, xj)).norm();
}

double mahalanobis_sq(const SquareMatrix& metric, const Vector& xi, const Vector& xj) {
  check_pair(xi, xj);
  if (metric.dim() != xi.size()) throw Error(ErrorKind::DimensionMismatch, "metric size differs from point size");
  const Vector v = xi - xj;
  return v.dot(metric.matrix() * v);
}

double plml_distance(const Vector& weights, std::span<const SquareMatrix> metrics, const Vector& xi,
                     const Vector& xj) {
  if (weights.size() != static_cast<Index>(metrics.size())) {
    throw Error(ErrorKind::DimensionMismatch, "one weight per metric expected");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const double w = weights(static_cast<Index>(k));
    if (w != 0.0) sum += w * mahalanobis_sq(metrics[k], xi, xj);
  }
  return std::sqrt(std::max(sum, 0.0));
}

int knn_vote(std::span<const int> labels, std::span<const double> distances, int k) {
  if (labels.size() != distances.size()) throw Error(ErrorKind::DimensionMismatch, "one distance per label expected");
  check_k(static_cast<Index>(labels.size()), k);

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto nearer = [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b] || (distances[a] == distances[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), nearer);

  const int top = *std::max_element(labels.begin(), labels.end());
  std::vector<int> votes(static_cast<std::size_t>(top) + 1, 0);
  for (int r = 0; r < k; ++r) ++votes[static_cast<std::size_t>(labels[order[static_cast<std::size_t>(r)]])];
  // max_element returns the first maximum, i.e. the smallest tied label.
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int knn_classify(const LabeledDataset& train, const Vector& query, int k, const PairDistance& distance) {
  check_k(train.size(), k);
  if (query.size() != train.dim()) throw Error(ErrorKind::DimensionMismatch, "query dimension differs from training set");
  std::vector<double> d(static_cast<std::size_t>(train.size()));
  for (Index j = 0; j < train.size(); ++j) d[static_cast<std::size_t>(j)] = distance(query, train.point(j));
  return knn_vote(train.labels(), d, k);
}

Predictor embedded_knn(const LabeledDataset& train, int k, PointMap embed) {
  check_k(train.size(), k);
  Matrix images(train.size(), train.dim());
  for (Index j = 0; j < train.size(); ++j) images.row(j) = embed(train.point(j)).transpose();
  return [images = std::move(images), labels = train.labels(), k, embed = std::move(embed)](const Vector& q) {
    if (q.size() != images.cols()) throw Error(ErrorKind::DimensionMismatch, "query dimension differs from training set");
    const Vector e = embed(q);
    const Vector d = (images.rowwise() - e.transpose()).rowwise().norm();
    return knn_vote(labels, std::span<const double>(d.data(), static_cast<std::size_t>(d.size())), k);
  };
}

Predictor piecewise_knn(const LabeledDataset& train, int k, std::vector<SquareMatrix> transforms,
                        std::vector<int> assignment) {
  check_k(train.size(), k);
  if (static_cast<Index>(assignment.size()) != train.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cluster assignment size differs from training set");
  }
  for (int c : assignment) {
    if (c < 0 || c >= static_cast<int>(transforms.size())) {
      throw Error(ErrorKind::InvalidArgument, "cluster index " + std::to_string(c) + " has no transform");
    }
  }
  // Images of every training point under every cluster's map.
  std::vector<Matrix> images;
  images.reserve(transforms.size());
  for (const auto& t : transforms) images.push_back(train.points() * t.matrix().transpose());
  return [images = std::move(images), transforms = std::move(transforms), assignment = std::move(assignment),
          labels = train.labels(), k](const Vector& q) {
    std::vector<Vector> mapped;
    mapped.reserve(transforms.size());
    for (const auto& t : transforms) mapped.push_back(t.matrix() * q);
    std::vector<double> d(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) {
      const auto c = static_cast<std::size_t>(assignment[j]);
      d[j] = (mapped[c] - images[c].row(static_cast<Index>(j)).transpose()).norm();
    }
    return knn_vote(labels, d, k);
  };
}

Predictor plml_knn(const LabeledDataset& train, int k, FusionAtlas atlas) {
  check_k(train.size(), k);
  std::vector<SquareMatrix> metrics;
  for (const auto& c : atlas.components()) {
    const Matrix l = c.linear_block();
    metrics.emplace_back(l.transpose() * l);
  }
  return [train, k, atlas = std::move(atlas), metrics = std::move(metrics)](const Vector& q) {
    const Vector w = normalized_weights(atlas, q);
    return knn_classify(train, q, k,
                        [&](const Vector& a, const Vector& b) { return plml_distance(w, metrics, a, b); });
  };
}

std::vector<int> predict_all(const Predictor& predict, const Matrix& queries) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  for (Index i = 0; i < queries.rows(); ++i) out.push_back(predict(queries.row(i).transpose()));
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorKind::DimensionMismatch, "prediction count differs from truth");
  if (truth.empty()) throw Error(ErrorKind::InvalidArgument, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

EvaluationReport EvaluationReport::from_folds(std::vector<double> accuracies) {
  if (accuracies.empty()) throw Error(ErrorKind::InvalidArgument, "report needs at least one fold");
  EvaluationReport r;
  r.per_fold_accuracy = std::move(accuracies);
  const auto& a = r.per_fold_accuracy;
  const auto n = static_cast<double>(a.size());
  r.mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  r.max = *std::max_element(a.begin(), a.end());
  r.min = *std::min_element(a.begin(), a.end());
  // Rounding can put the mean a hair outside [min, max] when all folds agree.
  r.mean = std::clamp(r.mean, r.min, r.max);
  if (a.size() > 1) {
    double ss = 0.0;
    for (double v : a) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "cross-validation needs at least 2 folds");
  if (labels.empty()) throw Error(ErrorKind::EmptyTrainingSet, "nothing to split into folds");
  const int top = *std::max_element(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(top) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw Error(ErrorKind::InvalidArgument, "labels must be non-negative");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(labels.size(), -1);
  int next = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    if (m.empty()) continue;
    if (static_cast<int>(m.size()) < folds) {
      throw Error(ErrorKind::ClassTooSmall, "class " + std::to_string(c) + " has " + std::to_string(m.size()) +
                                                " members, fewer than " + std::to_string(folds) + " folds");
    }
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t i : m) {
      fold_of[i] = next;
      next = (next + 1) % folds;
    }
  }
  return fold_of;
}

EvaluationReport cross_validate(const LabeledDataset& data, int folds, const Pipeline& pipeline, std::uint64_t seed,
                                bool parallel) {
  const auto fold_of = stratified_folds(data.labels(), folds, seed);
  return cross_validate(data, fold_of, folds, pipeline, parallel);
}

EvaluationReport cross_validate(const LabeledDataset& data, std::span<const int> fold_of, int folds,
                                const Pipeline& pipeline, bool parallel) {
  if (static_cast<Index>(fold_of.size()) != data.size()) {
    throw Error(ErrorKind::DimensionMismatch, "fold assignment size differs from dataset");
  }
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "cross-validation needs at least 2 folds");

  auto run_fold = [&data, fold_of, &pipeline](int f) {
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<Index>(i));
    if (test_rows.empty()) throw Error(ErrorKind::InvalidArgument, "fold " + std::to_string(f) + " is empty");
    const LabeledDataset test = data.subset(test_rows);
    const Predictor predict = pipeline(data.subset(train_rows));
    return accuracy(predict_all(predict, test.points()), test.labels());
  };

  std::vector<double> acc(static_cast<std::size_t>(folds));
  if (parallel) {
    std::vector<std::future<double>> jobs;
    jobs.reserve(acc.size());
    for (int f = 0; f < folds; ++f) jobs.push_back(std::async(std::launch::async, run_fold, f));
    for (std::size_t f = 0; f < jobs.size(); ++f) acc[f] = jobs[f].get();
  } else {
    for (int f = 0; f < folds; ++f) acc[static_cast<std::size_t>(f)] = run_fold(f);
  }
  return EvaluationReport::from_folds(std::move(acc));
}

std::vector<int> boundary_grid(const Predictor& predict, const GridSpec& grid) {
  std::vector<int> out;
  for (const auto& p : grid_points(grid)) out.push_back(predict(p));
  return out;
}

std::vector<int> boundary_grid(const LabeledDataset& train, int k, const PairDistance& distance,
                               const GridSpec& grid) {
  return boundary_grid([&](const Vector& q) { return knn_classify(train, q, k, distance); }, grid);
}

std::vector<Vector> label_flip_locus(std::span<const int> labels, const GridSpec& grid) {
  grid.validate();
  if (labels.size() != grid.size()) throw Error(ErrorKind::DimensionMismatch, "label count differs from grid size");
  const auto at = [&](int ix, int iy) { return labels[static_cast<std::size_t>(iy) * grid.nx + ix]; };
  const auto point = [&](double ix, double iy) {
    return Vector(Eigen::Vector2d(grid.xmin + ix * grid.dx(), grid.ymin + iy * grid.dy()));
  };
  std::vector<Vector> locus;
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      if (ix + 1 < grid.nx && at(ix, iy) != at(ix + 1, iy)) locus.push_back(point(ix + 0.5, iy));
      if (iy + 1 < grid.ny && at(ix, iy) != at(ix, iy + 1)) locus.push_back(point(ix, iy + 0.5));
    }
  }
  return locus;
}

double boundary_shift(std::span<const int> labels, const GridSpec& grid, std::span<const double> boundaries) {
  if (boundaries.empty()) throw Error(ErrorKind::InvalidArgument, "no reference boundaries");
  const auto locus = label_flip_locus(labels, grid);
  if (locus.empty()) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& p : locus) {
    double best = std::numeric_limits<double>::infinity();
    for (double b : boundaries) best = std::min(best, std::abs(p(0) - b));
    total += best;
  }
  return total / static_cast<double>(locus.size());
}

}  // namespace polymetric
