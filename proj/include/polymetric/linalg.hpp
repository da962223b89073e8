#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace polymetric {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dense real square matrix with finite entries. Construction validates both
// properties, so every SquareMatrix in flight is usable by the matrix
// functions below.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(Matrix m);

  static SquareMatrix identity(Eigen::Index dim);
  static SquareMatrix zero(Eigen::Index dim);
  static SquareMatrix diagonal(std::span<const double> diag);
  static SquareMatrix from_row_major(Eigen::Index dim, std::span<const double> entries);

  [[nodiscard]] Eigen::Index dim() const noexcept { return m_.rows(); }
  [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
  [[nodiscard]] double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }
  [[nodiscard]] std::vector<double> row_major() const;

  [[nodiscard]] double determinant() const;
  [[nodiscard]] double trace() const { return m_.trace(); }
  [[nodiscard]] double max_norm() const { return m_.cwiseAbs().maxCoeff(); }

  friend SquareMatrix operator*(const SquareMatrix& a, const SquareMatrix& b);
  friend SquareMatrix operator*(double s, const SquareMatrix& a);
  friend SquareMatrix operator+(const SquareMatrix& a, const SquareMatrix& b);
  friend SquareMatrix operator-(const SquareMatrix& a, const SquareMatrix& b);
  friend bool operator==(const SquareMatrix& a, const SquareMatrix& b) { return a.m_ == b.m_; }

 private:
  Matrix m_;
};

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double determinant = 0.0;
};

/// Additive regularization applied by callers that hit SingularMatrix.
inline constexpr double kDefaultRegularization = 1e-8;

/// |det A| below this multiple of max|a_ij|^dim counts as singular.
inline constexpr double kSingularityRelTol = 1e-12;

/// Eigenvector-matrix condition number above which the eigendecomposition
/// used for determinant repair is rejected.
inline constexpr double kDefectiveConditionLimit = 1e10;

[[nodiscard]] Spectrum spectrum(const SquareMatrix& a);

[[nodiscard]] bool is_singular(const SquareMatrix& a);

/// Returns a + eps * I.
[[nodiscard]] SquareMatrix regularize(const SquareMatrix& a, double eps = kDefaultRegularization);

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant (degree 3..13 picked from the 1-norm).
[[nodiscard]] SquareMatrix mat_exp(const SquareMatrix& a);

/// Principal logarithm. Real Schur form, repeated quasi-triangular square
/// roots until the factor is near I, then a Gauss-Legendre (Padé) evaluation
/// of log(I + X).
/// Throws Error{SingularMatrix} or Error{NonPrincipalLog}.
[[nodiscard]] SquareMatrix mat_log(const SquareMatrix& a);

/// Moves a matrix into GL+. Matrices with positive determinant come back
/// untouched; otherwise the negative real eigenvalue of smallest magnitude is
/// negated through the eigendecomposition.
/// Throws Error{SingularMatrix} or Error{DefectiveMatrix}.
[[nodiscard]] SquareMatrix project_to_glplus(const SquareMatrix& a);

/// exp(t * log(b * a^-1)) * a.
[[nodiscard]] SquareMatrix geodesic_interp(const SquareMatrix& a, const SquareMatrix& b, double t);

}  // namespace polymetric
