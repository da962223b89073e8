#include "polymetric/lmnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "polymetric/error.hpp"

namespace polymetric {

namespace {

using Index = Eigen::Index;

// Rows of X mapped by each cluster's transform: projected[c] = X Lcᵀ.
std::vector<Matrix> project_points(const Matrix& points, std::span<const SquareMatrix> transforms) {
  std::vector<Matrix> out;
  out.reserve(transforms.size());
  for (const auto& t : transforms) out.push_back(points * t.matrix().transpose());
  return out;
}

// Squared distances from anchor i to every point under the anchor's metric.
Vector anchor_sq_distances(const Matrix& projected, Index i) {
  return (projected.rowwise() - projected.row(i)).rowwise().squaredNorm();
}

void check_assignment(std::span<const SquareMatrix> transforms, std::span<const int> assignment,
                      const LabeledDataset& data) {
  if (static_cast<Index>(assignment.size()) != data.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cluster assignment size differs from dataset size");
  }
  for (int c : assignment) {
    if (c < 0 || c >= static_cast<int>(transforms.size())) {
      throw Error(ErrorKind::InvalidArgument, "cluster id " + std::to_string(c) + " has no metric");
    }
  }
  for (const auto& t : transforms) {
    if (t.dim() != data.dim()) throw Error(ErrorKind::DimensionMismatch, "metric size differs from feature dimension");
  }
}

double min_det(std::span<const SquareMatrix> transforms) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : transforms) m = std::min(m, t.determinant());
  return m;
}

void merge_triplets(std::vector<Triplet>& into, const std::vector<Triplet>& extra, bool& grew) {
  std::vector<Triplet> merged;
  merged.reserve(into.size() + extra.size());
  std::set_union(into.begin(), into.end(), extra.begin(), extra.end(), std::back_inserter(merged));
  grew = merged.size() > into.size();
  into = std::move(merged);
}

struct Candidate {
  std::vector<SquareMatrix> transforms;
  int repairs = 0;
};

// L - step * G per cluster, repaired into GL+ when requested. Returns false if
// a repair is impossible (the caller shortens the step).
bool make_candidate(const std::vector<SquareMatrix>& current, const std::vector<SquareMatrix>& grads, double step,
                    const LmnnConfig& config, Candidate& out) {
  out.transforms.clear();
  out.repairs = 0;
  for (std::size_t c = 0; c < current.size(); ++c) {
    SquareMatrix next(current[c].matrix() - step * grads[c].matrix());
    if (config.enforce_glplus) {
      bool repaired = false;
      if (next.determinant() <= 0.0) {
        try {
          if (is_singular(next)) next = regularize(next, config.singular_epsilon);
          next = project_to_glplus(next);
        } catch (const Error&) {
          return false;
        }
        repaired = true;
      }
      // A flipped tiny eigenvalue leaves det barely positive; the log of such
      // a map is refused downstream, so nudge it off the singular set.
      if (is_singular(next)) {
        next = regularize(next, config.singular_epsilon);
        repaired = true;
      }
      if (next.determinant() <= 0.0 || is_singular(next)) return false;
      if (repaired) ++out.repairs;
    }
    out.transforms.push_back(std::move(next));
  }
  return true;
}

MultiMetricResult train_joint(const LmnnConfig& config, const LabeledDataset& data, std::vector<int> assignment,
                              int clusters) {
  config.validate();
  const auto targets = find_target_neighbors(data, config.target_neighbors);
  std::vector<SquareMatrix> transforms(static_cast<std::size_t>(clusters), SquareMatrix::identity(data.dim()));

  TrainingTrace trace;
  TripletSet active = build_triplets(data, targets, transforms, assignment);
  double current = full_objective(transforms, assignment, data, targets, config.mu);
  trace.objective.push_back(current);
  trace.min_determinant.push_back(min_det(transforms));

  double step = config.learning_rate;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    if (iter > 0 && iter % config.active_set_refresh == 0) {
      bool grew = false;
      merge_triplets(active.triplets, build_triplets(data, targets, transforms, assignment).triplets, grew);
      ++trace.active_set_refreshes;
    }
    auto eval = multi_objective_and_gradient(transforms, assignment, data, active, config.mu);
    double grad_sq = 0.0;
    for (const auto& g : eval.gradients) grad_sq += g.matrix().squaredNorm();
    if (grad_sq == 0.0) {
      trace.converged = true;
      break;
    }

    Candidate cand;
    bool accepted = false;
    double full_next = current;
    double alpha = step;
    while (alpha >= config.min_step) {
      if (!make_candidate(transforms, eval.gradients, alpha, config, cand)) {
        alpha *= config.backtrack;
        continue;
      }
      const double active_next =
          multi_objective_and_gradient(cand.transforms, assignment, data, active, config.mu).value;
      if (active_next > eval.value - config.armijo_c * alpha * grad_sq) {
        alpha *= config.backtrack;
        continue;
      }
      // Impostors outside the active set may have entered the margin; the
      // accepted sequence is monotone in the full objective.
      full_next = full_objective(cand.transforms, assignment, data, targets, config.mu);
      if (full_next <= current) {
        accepted = true;
        break;
      }
      bool grew = false;
      auto violators = build_triplets(data, targets, transforms, assignment).triplets;
      merge_triplets(violators, build_triplets(data, targets, cand.transforms, assignment).triplets, grew);
      merge_triplets(active.triplets, violators, grew);
      ++trace.active_set_refreshes;
      if (grew) {
        eval = multi_objective_and_gradient(transforms, assignment, data, active, config.mu);
        grad_sq = 0.0;
        for (const auto& g : eval.gradients) grad_sq += g.matrix().squaredNorm();
        if (grad_sq == 0.0) break;
      } else {
        alpha *= config.backtrack;
      }
    }

    trace.iterations = iter + 1;
    if (!accepted) {
      trace.no_descent = grad_sq != 0.0;
      trace.converged = grad_sq == 0.0;
      break;
    }
    transforms = std::move(cand.transforms);
    trace.glplus_repairs += cand.repairs;
    const double previous = current;
    current = full_next;
    trace.objective.push_back(current);
    trace.min_determinant.push_back(min_det(transforms));
    step = 2.0 * alpha;
    if (previous - current <= config.tolerance * std::max(previous, 1e-300)) {
      trace.converged = true;
      break;
    }
  }

  MultiMetricResult result;
  for (int c = 0; c < clusters; ++c) result.metrics.push_back({transforms[static_cast<std::size_t>(c)], c});
  result.assignment = std::move(assignment);
  result.trace = std::move(trace);
  return result;
}

}  // namespace

Clustering Clustering::parse(const std::string& text) {
  if (text == "class") return by_class();
  const std::string prefix = "kmeans:";
  if (text.rfind(prefix, 0) == 0) {
    try {
      std::size_t used = 0;
      const int c = std::stoi(text.substr(prefix.size()), &used);
      if (used == text.size() - prefix.size() && c >= 1) return kmeans(c);
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorKind::InvalidArgument, "clustering must be 'class' or 'kmeans:N' (N >= 1), got '" + text + "'");
}

std::string Clustering::to_string() const {
  return kind == ClusteringKind::ByClass ? "class" : "kmeans:" + std::to_string(clusters);
}

void LmnnConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (target_neighbors < 1) bad("target_neighbors must be >= 1");
  if (!(mu >= 0.0 && mu <= 1.0)) bad("mu must lie in [0, 1]");
  if (!(learning_rate > 0.0)) bad("learning_rate must be positive");
  if (max_iters < 0) bad("max_iters must be non-negative");
  if (!(tolerance > 0.0)) bad("tolerance must be positive");
  if (active_set_refresh < 1) bad("active_set_refresh must be >= 1");
  if (!(backtrack > 0.0 && backtrack < 1.0)) bad("backtrack factor must lie in (0, 1)");
  if (clustering.kind == ClusteringKind::KMeans && clustering.clusters < 1) bad("kmeans needs at least one cluster");
  if (kmeans_restarts < 1) bad("kmeans_restarts must be >= 1");
}

std::vector<TargetPair> find_target_neighbors(const LabeledDataset& data, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "target neighbor count must be >= 1");
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] <= k) {
      throw Error(ErrorKind::ClassTooSmall, "class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                                " members, needs more than k=" + std::to_string(k));
    }
  }
  std::vector<TargetPair> targets;
  targets.reserve(static_cast<std::size_t>(data.size() * k));
  const Matrix& x = data.points();
  std::vector<std::pair<double, Index>> cand;
  for (Index i = 0; i < data.size(); ++i) {
    cand.clear();
    for (Index j = 0; j < data.size(); ++j) {
      if (j != i && data.label(j) == data.label(i)) cand.emplace_back((x.row(i) - x.row(j)).squaredNorm(), j);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int r = 0; r < k; ++r) targets.push_back({i, cand[static_cast<std::size_t>(r)].second});
  }
  return targets;
}

TripletSet build_triplets(const LabeledDataset& data, std::span<const TargetPair> targets,
                          std::span<const SquareMatrix> metrics, std::span<const int> assignment) {
  check_assignment(metrics, assignment, data);
  TripletSet out;
  out.targets.assign(targets.begin(), targets.end());
  const auto projected = project_points(data.points(), metrics);
  Index last_anchor = -1;
  Vector dist;
  for (const auto& t : targets) {
    if (t.i != last_anchor) {
      dist = anchor_sq_distances(projected[static_cast<std::size_t>(assignment[static_cast<std::size_t>(t.i)])], t.i);
      last_anchor = t.i;
    }
    const double radius = dist(t.j) + 1.0;
    for (Index k = 0; k < data.size(); ++k) {
      if (data.label(k) != data.label(t.i) && dist(k) < radius) out.triplets.push_back({t.i, t.j, k});
    }
  }
  std::sort(out.triplets.begin(), out.triplets.end());
  return out;
}

TripletSet build_triplets(const LabeledDataset& data, std::span<const TargetPair> targets,
                          const SquareMatrix& metric) {
  const std::vector<int> assignment(static_cast<std::size_t>(data.size()), 0);
  return build_triplets(data, targets, std::span<const SquareMatrix>(&metric, 1), assignment);
}

MultiObjectiveValue multi_objective_and_gradient(std::span<const SquareMatrix> transforms,
                                                 std::span<const int> assignment, const LabeledDataset& data,
                                                 const TripletSet& triplets, double mu) {
  check_assignment(transforms, assignment, data);
  const Index d = data.dim();
  const Matrix& x = data.points();
  std::vector<Matrix> outer(transforms.size(), Matrix::Zero(d, d));
  double value = 0.0;
  auto cluster_of = [&](Index i) { return static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]); };

  for (const auto& t : triplets.targets) {
    const Vector diff = (x.row(t.i) - x.row(t.j)).transpose();
    const auto c = cluster_of(t.i);
    value += (transforms[c].matrix() * diff).squaredNorm();
    outer[c].noalias() += diff * diff.transpose();
  }
  for (const auto& t : triplets.triplets) {
    const auto c = cluster_of(t.i);
    const Vector dij = (x.row(t.i) - x.row(t.j)).transpose();
    const Vector dik = (x.row(t.i) - x.row(t.k)).transpose();
    const double hinge = 1.0 + (transforms[c].matrix() * dij).squaredNorm() - (transforms[c].matrix() * dik).squaredNorm();
    if (hinge > 0.0) {
      value += mu * hinge;
      outer[c].noalias() += mu * (dij * dij.transpose() - dik * dik.transpose());
    }
  }
  MultiObjectiveValue out;
  out.value = value;
  for (std::size_t c = 0; c < transforms.size(); ++c) {
    out.gradients.emplace_back(2.0 * transforms[c].matrix() * outer[c]);
  }
  return out;
}

ObjectiveValue objective_and_gradient(const SquareMatrix& transform, const LabeledDataset& data,
                                      const TripletSet& triplets, double mu) {
  const std::vector<int> assignment(static_cast<std::size_t>(data.size()), 0);
  auto multi = multi_objective_and_gradient(std::span<const SquareMatrix>(&transform, 1), assignment, data,
                                            triplets, mu);
  return {multi.value, std::move(multi.gradients.front())};
}

double full_objective(std::span<const SquareMatrix> transforms, std::span<const int> assignment,
                      const LabeledDataset& data, std::span<const TargetPair> targets, double mu) {
  check_assignment(transforms, assignment, data);
  const auto projected = project_points(data.points(), transforms);
  double pull = 0.0;
  double push = 0.0;
  Index last_anchor = -1;
  Vector dist;
  for (const auto& t : targets) {
    if (t.i != last_anchor) {
      dist = anchor_sq_distances(projected[static_cast<std::size_t>(assignment[static_cast<std::size_t>(t.i)])], t.i);
      last_anchor = t.i;
    }
    pull += dist(t.j);
    const double radius = dist(t.j) + 1.0;
    for (Index k = 0; k < data.size(); ++k) {
      if (data.label(k) != data.label(t.i) && dist(k) < radius) push += radius - dist(k);
    }
  }
  return pull + mu * push;
}

std::vector<int> kmeans(const Matrix& points, int clusters, int restarts, std::uint64_t seed) {
  const Index n = points.rows();
  if (clusters < 1 || clusters > n) {
    throw Error(ErrorKind::InvalidArgument, "kmeans needs 1 <= clusters <= n, got " + std::to_string(clusters));
  }
  std::mt19937_64 rng(seed);
  std::vector<int> best;
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int r = 0; r < restarts; ++r) {
    // k-means++ seeding.
    Matrix centers(clusters, points.cols());
    std::uniform_int_distribution<Index> pick(0, n - 1);
    centers.row(0) = points.row(pick(rng));
    Vector nearest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < clusters; ++c) {
      const double total = nearest.sum();
      Index chosen = pick(rng);
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (chosen = 0; chosen < n - 1; ++chosen) {
          target -= nearest(chosen);
          if (target <= 0.0) break;
        }
      }
      centers.row(c) = points.row(chosen);
      nearest = nearest.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    double inertia = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (Index i = 0; i < n; ++i) {
        Index arg = 0;
        const double dmin = (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&arg);
        inertia += dmin;
        if (assign[static_cast<std::size_t>(i)] != static_cast<int>(arg)) {
          assign[static_cast<std::size_t>(i)] = static_cast<int>(arg);
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(clusters, points.cols());
      std::vector<Index> counts(static_cast<std::size_t>(clusters), 0);
      for (Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
      }
      for (int c = 0; c < clusters; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        } else {
          // Re-seed an empty cluster at the point farthest from its center.
          Index far = 0;
          Vector resid(n);
          for (Index i = 0; i < n; ++i) resid(i) = (points.row(i) - centers.row(assign[static_cast<std::size_t>(i)])).squaredNorm();
          resid.maxCoeff(&far);
          centers.row(c) = points.row(far);
        }
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  return best;
}

std::vector<int> cluster_assignment(const LabeledDataset& data, const LmnnConfig& config) {
  if (config.clustering.kind == ClusteringKind::ByClass) return data.labels();
  return kmeans(data.points(), config.clustering.clusters, config.kmeans_restarts, config.seed);
}

LmnnResult train_lmnn(const LmnnConfig& config, const LabeledDataset& data) {
  auto joint = train_joint(config, data, std::vector<int>(static_cast<std::size_t>(data.size()), 0), 1);
  return {std::move(joint.metrics.front().transform), std::move(joint.trace)};
}

MultiMetricResult train_multi_metric(const LmnnConfig& config, const LabeledDataset& data) {
  config.validate();
  auto assignment = cluster_assignment(data, config);
  const int clusters = config.clustering.kind == ClusteringKind::ByClass ? data.num_classes()
                                                                          : config.clustering.clusters;
  return train_joint(config, data, std::move(assignment), clusters);
}

}  // namespace polymetric
