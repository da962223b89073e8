#include <doctest.h>

#include <algorithm>
#include <set>

#include "polymetric/error.hpp"
#include "polymetric/lmnn.hpp"
#include "test_support.hpp"

using namespace polymetric;
using namespace polymetric::testing;

namespace {

// Classes split along x; y is a large-scale nuisance direction.
LabeledDataset two_gaussians(std::uint64_t seed, int per_class, double separation, double spread_x,
                             double spread_y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix pts(2 * per_class, 2);
  std::vector<int> labels;
  for (int i = 0; i < 2 * per_class; ++i) {
    const int c = i < per_class ? 0 : 1;
    pts(i, 0) = (c == 0 ? -0.5 : 0.5) * separation + spread_x * n(rng);
    pts(i, 1) = spread_y * n(rng);
    labels.push_back(c);
  }
  return {pts, labels};
}

// Every (target, differently labeled) triplet, active or not.
TripletSet all_triplets(const LabeledDataset& data, const std::vector<TargetPair>& targets) {
  TripletSet s;
  s.targets = targets;
  for (const auto& t : targets)
    for (Eigen::Index k = 0; k < data.size(); ++k)
      if (data.label(k) != data.label(t.i)) s.triplets.push_back({t.i, t.j, k});
  return s;
}

// Brute-force count of margin violations under metric L over all triplets.
int violated_count(const LabeledDataset& data, const std::vector<TargetPair>& targets, const Matrix& l) {
  int count = 0;
  for (const auto& t : targets) {
    const double dij = (l * (data.point(t.i) - data.point(t.j))).squaredNorm();
    for (Eigen::Index k = 0; k < data.size(); ++k) {
      if (data.label(k) == data.label(t.i)) continue;
      if ((l * (data.point(t.i) - data.point(k))).squaredNorm() < dij + 1.0) ++count;
    }
  }
  return count;
}

}  // namespace

TEST_CASE("find_target_neighbors") {
  SUBCASE("collinear points") {
    Matrix pts(3, 1);
    pts << 0.0, 1.0, 3.0;
    const LabeledDataset data(pts, {0, 0, 0});
    const auto t = find_target_neighbors(data, 1);
    const std::vector<TargetPair> want{{0, 1}, {1, 0}, {2, 1}};
    CHECK(t == want);
  }
  SUBCASE("saturation gives every same-class pair") {
    std::mt19937_64 rng(1);
    const LabeledDataset data(random_gaussian(rng, 5, 2), {0, 0, 0, 0, 0});
    const auto t = find_target_neighbors(data, 4);
    std::set<std::pair<Eigen::Index, Eigen::Index>> got;
    for (const auto& p : t) got.insert({p.i, p.j});
    CHECK(got.size() == 20);
  }
  SUBCASE("never crosses classes") {
    const auto data = two_gaussians(2, 10, 20.0, 0.5, 0.5);
    for (const auto& p : find_target_neighbors(data, 3)) CHECK(data.label(p.i) == data.label(p.j));
  }
  SUBCASE("class too small") {
    Matrix pts(3, 1);
    pts << 0.0, 1.0, 3.0;
    try {
      static_cast<void>(find_target_neighbors(LabeledDataset(pts, {0, 0, 1}), 1));
      FAIL("expected ClassTooSmall");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ClassTooSmall);
    }
  }
}

TEST_CASE("build_triplets") {
  SUBCASE("separated by more than the margin") {
    Matrix pts(4, 1);
    pts << 0.0, 0.5, 5.0, 5.5;
    const LabeledDataset data(pts, {0, 0, 1, 1});
    const auto targets = find_target_neighbors(data, 1);
    CHECK(build_triplets(data, targets, SquareMatrix::identity(1)).triplets.empty());
  }
  SUBCASE("one impostor matches the brute-force margin check") {
    Matrix pts(5, 2);
    pts << 0, 0, 1, 0, 0, 1, 0.5, 0.2, 6, 6;
    const LabeledDataset data(pts, {0, 0, 0, 1, 1});
    // Class 1 needs two members for k=1; its second member is far away.
    const auto targets = find_target_neighbors(data, 1);
    const auto got = build_triplets(data, targets, SquareMatrix::identity(2)).triplets;
    std::vector<Triplet> want;
    for (const auto& t : targets) {
      const double dij = (data.point(t.i) - data.point(t.j)).squaredNorm();
      for (Eigen::Index k = 0; k < data.size(); ++k)
        if (data.label(k) != data.label(t.i) && (data.point(t.i) - data.point(k)).squaredNorm() < dij + 1.0)
          want.push_back({t.i, t.j, k});
    }
    std::sort(want.begin(), want.end());
    CHECK(got == want);
    for (const auto& t : got) {
      if (data.label(t.i) == 0) CHECK(t.k == 3);
    }
  }
  SUBCASE("single class yields nothing") {
    std::mt19937_64 rng(4);
    const LabeledDataset data(random_gaussian(rng, 6, 2), {0, 0, 0, 0, 0, 0});
    CHECK(build_triplets(data, find_target_neighbors(data, 2), SquareMatrix::identity(2)).triplets.empty());
  }
}

TEST_CASE("objective_and_gradient") {
  SUBCASE("empty sums") {
    std::mt19937_64 rng(5);
    const LabeledDataset data(random_gaussian(rng, 4, 2), {0, 0, 1, 1});
    const auto r = objective_and_gradient(SquareMatrix::identity(2), data, TripletSet{}, 0.5);
    CHECK(r.value == 0.0);
    CHECK(r.gradient.matrix().isZero(0.0));
  }
  SUBCASE("pull term is quadratic in L") {
    std::mt19937_64 rng(6);
    const LabeledDataset data(random_gaussian(rng, 6, 2), {0, 0, 0, 1, 1, 1});
    TripletSet s;
    s.targets = find_target_neighbors(data, 2);
    const SquareMatrix l(random_gaussian(rng, 2, 2));
    const double base = objective_and_gradient(l, data, s, 0.5).value;
    CHECK(objective_and_gradient(2.0 * l, data, s, 0.5).value == doctest::Approx(4.0 * base).epsilon(1e-13));
  }
  SUBCASE("central finite differences") {
    std::mt19937_64 rng(8);
    constexpr double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial) {
      const LabeledDataset data(random_gaussian(rng, 10, 2), {0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
      const auto s = all_triplets(data, find_target_neighbors(data, 2));
      const Matrix l = random_gaussian(rng, 2, 2);
      const double mu = 0.25 + 0.5 * (trial % 3) / 2.0;
      const auto r = objective_and_gradient(SquareMatrix(l), data, s, mu);
      Matrix fd(2, 2);
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          Matrix lp = l;
          Matrix lm = l;
          lp(a, b) += h;
          lm(a, b) -= h;
          fd(a, b) = (objective_and_gradient(SquareMatrix(lp), data, s, mu).value -
                      objective_and_gradient(SquareMatrix(lm), data, s, mu).value) /
                     (2.0 * h);
        }
      }
      CHECK(rel_frobenius(r.gradient.matrix(), fd) < 1e-5);
    }
  }
}

TEST_CASE("train_lmnn") {
  const auto data = two_gaussians(21, 25, 0.8, 0.1, 5.0);
  LmnnConfig config;
  config.max_iters = 100;

  const auto result = train_lmnn(config, data);
  const auto& hist = result.trace.objective;
  REQUIRE(hist.size() >= 2);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
  CHECK(hist.back() <= hist.front());
  CHECK(result.transform.matrix().allFinite());
  CHECK(result.transform.determinant() > 0.0);
  for (double d : result.trace.min_determinant) CHECK(d > 0.0);

  const auto targets = find_target_neighbors(data, config.target_neighbors);
  CHECK(violated_count(data, targets, result.transform.matrix()) <= violated_count(data, targets, Matrix::Identity(2, 2)));

  // Metric from the learned map is symmetric PSD.
  const Matrix m = result.transform.matrix().transpose() * result.transform.matrix();
  CHECK((m - m.transpose()).norm() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("iterates that collapse a nuisance direction stay off the singular set") {
  // The y direction carries no label information, so training drives its
  // scale through zero repeatedly.
  const auto data = two_gaussians(0, 20, 0.8, 0.1, 5.0);
  LmnnConfig config;
  config.max_iters = 100;
  const auto result = train_lmnn(config, data);
  CHECK(result.trace.glplus_repairs > 0);
  CHECK(result.transform.determinant() > 0.0);
  CHECK_FALSE(is_singular(result.transform));
  CHECK_NOTHROW((void)mat_log(result.transform));
}

TEST_CASE("zero iterations keep the Euclidean metric") {
  const auto data = two_gaussians(3, 8, 2.0, 0.5, 0.5);
  LmnnConfig config;
  config.mu = 0.0;
  config.max_iters = 0;
  const auto result = train_lmnn(config, data);
  CHECK(result.transform == SquareMatrix::identity(2));
  const Vector diff = data.point(0) - data.point(9);
  CHECK((result.transform.matrix() * diff).norm() == diff.norm());
}

TEST_CASE("train_multi_metric") {
  SUBCASE("one k-means cluster reproduces single-metric training") {
    const auto data = two_gaussians(31, 20, 0.8, 0.1, 5.0);
    LmnnConfig config;
    config.max_iters = 40;
    config.clustering = Clustering::kmeans(1);
    const auto multi = train_multi_metric(config, data);
    const auto single = train_lmnn(config, data);
    REQUIRE(multi.metrics.size() == 1);
    CHECK(multi.metrics.front().transform == single.transform);
    CHECK(multi.trace.objective == single.trace.objective);
  }
  SUBCASE("two separated clusters with rotated structure") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix pts(80, 2);
    std::vector<int> labels;
    for (int i = 0; i < 80; ++i) {
      const bool left = i < 40;
      const int cls = (i % 40) < 20 ? 0 : 1;
      // Left region separates classes along x, right region along y.
      Eigen::Vector2d p(0.3 * n(rng) + (cls ? 0.6 : -0.6), 1.5 * n(rng));
      if (!left) p = Eigen::Vector2d(p.y(), p.x());
      pts.row(i) = (p + Eigen::Vector2d(left ? -15.0 : 15.0, 0.0)).transpose();
      labels.push_back(cls);
    }
    const LabeledDataset data(pts, labels);
    LmnnConfig config;
    config.clustering = Clustering::kmeans(2);
    config.max_iters = 100;
    config.seed = 7;
    const auto r = train_multi_metric(config, data);
    REQUIRE(r.metrics.size() == 2);
    for (double d : r.trace.min_determinant) CHECK(d > 0.0);
    for (const auto& m : r.metrics) CHECK(m.transform.determinant() > 0.0);
    CHECK((r.metrics[0].transform.matrix() - r.metrics[1].transform.matrix()).norm() > 0.1);
    // Each cluster is a spatial half.
    for (int i = 1; i < 40; ++i) CHECK(r.assignment[static_cast<std::size_t>(i)] == r.assignment[0]);
    CHECK(r.assignment[40] != r.assignment[0]);
  }
  SUBCASE("by-class clustering uses labels") {
    const auto data = two_gaussians(5, 10, 3.0, 0.5, 0.5);
    LmnnConfig config;
    config.max_iters = 10;
    const auto r = train_multi_metric(config, data);
    CHECK(r.assignment == data.labels());
    CHECK(r.metrics.size() == 2);
  }
}

TEST_CASE("clustering parse and config validation") {
  CHECK(Clustering::parse("class").kind == ClusteringKind::ByClass);
  CHECK(Clustering::parse("kmeans:4").clusters == 4);
  CHECK(Clustering::parse("kmeans:4").to_string() == "kmeans:4");
  CHECK_THROWS_AS(static_cast<void>(Clustering::parse("kmeans:0")), Error);
  CHECK_THROWS_AS(static_cast<void>(Clustering::parse("spectral")), Error);
  LmnnConfig c;
  c.mu = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}
