#pragma once

#include <Eigen/Dense>

namespace asvb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Cholesky factor of a symmetric PSD matrix with the jitter policy used
/// throughout the library: the plain matrix is tried first, then
/// 1e-10 * trace/n is added to the diagonal and multiplied by ten on each
/// failure up to 1e-4 * trace/n. Throws ConditioningError past that.
class JitteredCholesky {
 public:
  JitteredCholesky() = default;
  explicit JitteredCholesky(const MatrixXd &a);

  const Eigen::LLT<MatrixXd> &llt() const { return llt_; }
  MatrixXd matrix_l() const { return llt_.matrixL(); }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return llt_.rows(); }

  /// log |A + jitter I|
  double log_det() const;
  /// Solves (A + jitter I) x = b.
  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs> &b) const {
    return llt_.solve(b);
  }
  /// L^{-1} b
  MatrixXd solve_lower(const MatrixXd &b) const;

 private:
  Eigen::LLT<MatrixXd> llt_;
  double jitter_ = 0.0;
};

/// Leading eigenpairs of a symmetric matrix, eigenvalues non-increasing.
struct EigenPairs {
  VectorXd values;
  MatrixXd vectors;  // columns orthonormal
};

/// Top-m eigenpairs of the symmetric matrix `a` (only its lower triangle is
/// read). Requires 1 <= m <= a.rows().
EigenPairs top_eigenpairs(const MatrixXd &a, Eigen::Index m);

/// True when |a - a^T| <= tol * max|a| entrywise.
bool is_symmetric(const MatrixXd &a, double tol = 1e-10);

/// log N(y; 0, S) given a factorization of S.
double gaussian_log_density(const VectorXd &y, const JitteredCholesky &chol);

/// KL(N(m0, S0) || N(m1, S1)) for dense finite-dimensional Gaussians.
double gaussian_kl(const VectorXd &m0, const MatrixXd &s0, const VectorXd &m1,
                   const MatrixXd &s1);

}  // namespace asvb
