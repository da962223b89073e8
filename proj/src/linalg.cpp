#include "polymetric/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "polymetric/error.hpp"

namespace polymetric {

namespace {

using Index = Eigen::Index;

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_nonsingular(const SquareMatrix& a, const char* where) {
  if (is_singular(a)) {
    throw Error(ErrorKind::SingularMatrix,
                std::string(where) + ": |det| below " + std::to_string(kSingularityRelTol) +
                    " * max|a|^dim");
  }
}

double one_norm(const Matrix& m) { return m.cwiseAbs().colwise().sum().maxCoeff(); }

// Diagonal Padé coefficients for exp, b_0 = 1.
template <int Degree>
constexpr std::array<double, Degree + 1> exp_pade_coefficients() {
  std::array<double, Degree + 1> b{};
  long double c = 1.0L;
  for (int j = 0; j <= Degree; ++j) {
    b[j] = static_cast<double>(c);
    c = c * (Degree - j) / ((2.0L * Degree - j) * (j + 1));
  }
  return b;
}

template <int Degree>
Matrix exp_pade(const Matrix& a) {
  static constexpr auto b = exp_pade_coefficients<Degree>();
  const Index n = a.rows();
  const Matrix a2 = a * a;
  Matrix even = Matrix::Zero(n, n);
  Matrix odd = Matrix::Zero(n, n);
  Matrix power = Matrix::Identity(n, n);  // a2^k
  for (int k = 0; 2 * k <= Degree; ++k) {
    even += b[2 * k] * power;
    if (2 * k + 1 <= Degree) odd += b[2 * k + 1] * power;
    power = power * a2;
  }
  const Matrix u = a * odd;
  return (even - u).partialPivLu().solve(even + u);
}

// Largest 1-norms for which the degree-m approximant is accurate to double
// precision (Higham 2005).
constexpr double kTheta3 = 1.495585217958292e-2;
constexpr double kTheta5 = 2.539398330063230e-1;
constexpr double kTheta7 = 9.504178996162932e-1;
constexpr double kTheta9 = 2.097847961257068e0;
constexpr double kTheta13 = 5.371920351148152e0;

struct Block {
  Index start;
  Index size;
};

std::vector<Block> schur_blocks(const Matrix& t) {
  std::vector<Block> blocks;
  const Index n = t.rows();
  Index i = 0;
  while (i < n) {
    if (i + 1 < n && t(i + 1, i) != 0.0) {
      blocks.push_back({i, 2});
      i += 2;
    } else {
      blocks.push_back({i, 1});
      i += 1;
    }
  }
  return blocks;
}

// Principal square root of a diagonal block of the real Schur form.
Matrix block_sqrt(const Matrix& t) {
  if (t.rows() == 1) return Matrix::Constant(1, 1, std::sqrt(t(0, 0)));
  const double theta = 0.5 * (t(0, 0) + t(1, 1));
  const double mu2 = (t(0, 0) - theta) * (t(1, 1) - theta) - t(0, 1) * t(1, 0);
  const std::complex<double> lambda(theta, std::sqrt(std::max(mu2, 0.0)));
  const double alpha = std::sqrt(lambda).real();
  return alpha * Matrix::Identity(2, 2) + (t - theta * Matrix::Identity(2, 2)) / (2.0 * alpha);
}

// Solves p*x + x*q = r for small blocks through the Kronecker form.
Matrix solve_sylvester_small(const Matrix& p, const Matrix& q, const Matrix& r) {
  const Index m = p.rows();
  const Index n = q.rows();
  Matrix k = Matrix::Zero(m * n, m * n);
  for (Index j = 0; j < n; ++j) {
    k.block(j * m, j * m, m, m) += p;
    for (Index l = 0; l < n; ++l) k.block(l * m, j * m, m, m).diagonal().array() += q(j, l);
  }
  const Vector x = k.fullPivLu().solve(r.reshaped());
  return x.reshaped(m, n);
}

// Principal square root of an upper quasi-triangular matrix, block by block.
Matrix quasi_triangular_sqrt(const Matrix& t, const std::vector<Block>& blocks) {
  const Index n = t.rows();
  Matrix u = Matrix::Zero(n, n);
  for (const auto& b : blocks) u.block(b.start, b.start, b.size, b.size) = block_sqrt(t.block(b.start, b.start, b.size, b.size));
  const auto nb = static_cast<Index>(blocks.size());
  for (Index j = 1; j < nb; ++j) {
    const Block bj = blocks[j];
    for (Index i = j - 1; i >= 0; --i) {
      const Block bi = blocks[i];
      Matrix rhs = t.block(bi.start, bj.start, bi.size, bj.size);
      for (Index k = i + 1; k < j; ++k) {
        const Block bk = blocks[k];
        rhs -= u.block(bi.start, bk.start, bi.size, bk.size) * u.block(bk.start, bj.start, bk.size, bj.size);
      }
      u.block(bi.start, bj.start, bi.size, bj.size) = solve_sylvester_small(
          u.block(bi.start, bi.start, bi.size, bi.size), u.block(bj.start, bj.start, bj.size, bj.size), rhs);
    }
  }
  return u;
}

// Gauss-Legendre nodes/weights on [0, 1] via Newton on P_n.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

Quadrature gauss_legendre_unit(int n) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    q.nodes[i] = 0.5 * (x + 1.0);
    q.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

// ‖X‖₁ ≤ this before the quadrature step; the 8-point rule is then accurate
// well below double precision.
constexpr double kLogSeriesRadius = 0.25;
constexpr int kLogQuadraturePoints = 8;
constexpr int kMaxSquareRoots = 100;

}  // namespace

SquareMatrix::SquareMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "SquareMatrix needs a non-empty square shape, got " +
                                                   std::to_string(m_.rows()) + "x" + std::to_string(m_.cols()));
  }
  if (!all_finite(m_)) throw Error(ErrorKind::NonFinite, "SquareMatrix entries must be finite");
}

SquareMatrix SquareMatrix::identity(Eigen::Index dim) { return SquareMatrix(Matrix::Identity(dim, dim)); }

SquareMatrix SquareMatrix::zero(Eigen::Index dim) { return SquareMatrix(Matrix::Zero(dim, dim)); }

SquareMatrix SquareMatrix::diagonal(std::span<const double> diag) {
  Vector v = Eigen::Map<const Vector>(diag.data(), static_cast<Index>(diag.size()));
  return SquareMatrix(Matrix(v.asDiagonal()));
}

SquareMatrix SquareMatrix::from_row_major(Eigen::Index dim, std::span<const double> entries) {
  if (static_cast<Index>(entries.size()) != dim * dim) {
    throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(dim * dim) + " entries, got " +
                                                   std::to_string(entries.size()));
  }
  Matrix m(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) m(r, c) = entries[static_cast<std::size_t>(r * dim + c)];
  return SquareMatrix(std::move(m));
}

std::vector<double> SquareMatrix::row_major() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m_.size()));
  for (Index r = 0; r < m_.rows(); ++r)
    for (Index c = 0; c < m_.cols(); ++c) out.push_back(m_(r, c));
  return out;
}

double SquareMatrix::determinant() const { return m_.determinant(); }

SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b) { return SquareMatrix(a.m_ * b.m_); }
SquareMatrix operator*(double s, const SquareMatrix& a) { return SquareMatrix(s * a.m_); }
SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b) { return SquareMatrix(a.m_ + b.m_); }
SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b) { return SquareMatrix(a.m_ - b.m_); }

Spectrum spectrum(const SquareMatrix& a) {
  Eigen::EigenSolver<Matrix> solver(a.matrix(), /*computeEigenvectors=*/false);
  Spectrum s;
  const auto& ev = solver.eigenvalues();
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  s.determinant = a.determinant();
  return s;
}

bool is_singular(const SquareMatrix& a) {
  const double scale = a.max_norm();
  if (scale == 0.0) return true;
  const double det = a.determinant();
  return std::abs(det) < kSingularityRelTol * std::pow(scale, static_cast<double>(a.dim()));
}

SquareMatrix regularize(const SquareMatrix& a, double eps) {
  return SquareMatrix(a.matrix() + eps * Matrix::Identity(a.dim(), a.dim()));
}

SquareMatrix mat_exp(const SquareMatrix& a) {
  const Matrix& m = a.matrix();
  const double norm = one_norm(m);
  if (norm <= kTheta3) return SquareMatrix(exp_pade<3>(m));
  if (norm <= kTheta5) return SquareMatrix(exp_pade<5>(m));
  if (norm <= kTheta7) return SquareMatrix(exp_pade<7>(m));
  if (norm <= kTheta9) return SquareMatrix(exp_pade<9>(m));
  const int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / kTheta13))));
  Matrix r = exp_pade<13>(m / std::ldexp(1.0, squarings));
  for (int i = 0; i < squarings; ++i) r = r * r;
  return SquareMatrix(std::move(r));
}

SquareMatrix mat_log(const SquareMatrix& a) {
  require_nonsingular(a, "mat_log");
  const Index n = a.dim();
  Eigen::RealSchur<Matrix> schur(a.matrix());
  if (schur.info() != Eigen::Success) throw Error(ErrorKind::NonFinite, "mat_log: real Schur iteration failed");
  Matrix t = schur.matrixT();
  const Matrix& q = schur.matrixU();
  const auto blocks = schur_blocks(t);

  for (const auto& b : blocks) {
    if (b.size == 1 && t(b.start, b.start) <= 0.0) {
      throw Error(ErrorKind::NonPrincipalLog,
                  "mat_log: eigenvalue " + std::to_string(t(b.start, b.start)) + " on the closed negative real axis");
    }
    if (b.size == 2) {
      const Matrix blk = t.block(b.start, b.start, 2, 2);
      const double half_tr = 0.5 * blk.trace();
      const double disc = half_tr * half_tr - blk.determinant();
      if (disc >= 0.0 && half_tr - std::sqrt(disc) <= 0.0) {
        throw Error(ErrorKind::NonPrincipalLog, "mat_log: real eigenvalue on the closed negative real axis");
      }
    }
  }

  const Matrix eye = Matrix::Identity(n, n);
  int roots = 0;
  while (one_norm(t - eye) > kLogSeriesRadius) {
    if (roots == kMaxSquareRoots) throw Error(ErrorKind::NonFinite, "mat_log: square-root iteration did not converge");
    t = quasi_triangular_sqrt(t, blocks);
    ++roots;
  }

  static const Quadrature quad = gauss_legendre_unit(kLogQuadraturePoints);
  const Matrix x = t - eye;
  Matrix log_t = Matrix::Zero(n, n);
  for (int j = 0; j < kLogQuadraturePoints; ++j) {
    const Matrix denom = eye + quad.nodes[j] * x;
    log_t += quad.weights[j] * denom.partialPivLu().solve(x);
  }
  Matrix result = std::ldexp(1.0, roots) * (q * log_t * q.transpose());
  return SquareMatrix(std::move(result));
}

SquareMatrix project_to_glplus(const SquareMatrix& a) {
  require_nonsingular(a, "project_to_glplus");
  if (a.determinant() > 0.0) return a;

  Eigen::EigenSolver<Matrix> solver(a.matrix());
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::DefectiveMatrix, "eigendecomposition failed");
  const Eigen::MatrixXcd v = solver.eigenvectors();
  const Eigen::VectorXcd lambda = solver.eigenvalues();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(v);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(sv.size() - 1);
  if (!(cond <= kDefectiveConditionLimit)) {
    throw Error(ErrorKind::DefectiveMatrix,
                "eigenvector condition number " + std::to_string(cond) + " exceeds the repair limit");
  }

  Index pick = -1;
  for (Index i = 0; i < lambda.size(); ++i) {
    const auto& l = lambda(i);
    const bool real_negative = l.real() < 0.0 && std::abs(l.imag()) <= 1e-12 * std::abs(l);
    if (real_negative && (pick < 0 || std::abs(l.real()) < std::abs(lambda(pick).real()))) pick = i;
  }
  if (pick < 0) throw Error(ErrorKind::DefectiveMatrix, "det < 0 but no negative real eigenvalue was resolved");

  // A' = V diag(λ') V⁻¹ differs from A only by the rank-one term of the flipped
  // eigenpair: A' = A - 2 λ v wᵀ with wᵀ the matching row of V⁻¹.
  const Eigen::MatrixXcd v_inv = v.inverse();
  const Eigen::MatrixXcd update = v.col(pick) * v_inv.row(pick);
  Matrix repaired = a.matrix() - 2.0 * lambda(pick).real() * update.real();
  return SquareMatrix(std::move(repaired));
}

SquareMatrix geodesic_interp(const SquareMatrix& a, const SquareMatrix& b, double t) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::DimensionMismatch, "geodesic_interp: operands differ in size");
  require_nonsingular(a, "geodesic_interp");
  // d = b a⁻¹, solved as (a⁻ᵀ bᵀ)ᵀ.
  const Matrix d = a.matrix().transpose().partialPivLu().solve(b.matrix().transpose()).transpose();
  const SquareMatrix step = mat_exp(t * mat_log(SquareMatrix(d)));
  return step * a;
}

}  // namespace polymetric
