#include "asvb/linalg.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include <lapacke.h>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

}  // namespace

JitteredCholesky::JitteredCholesky(const MatrixXd &a) {
  const Eigen::Index n = a.rows();
  if (n != a.cols()) {
    throw DomainError("cholesky: matrix is not square");
  }
  if (n == 0) {
    return;
  }
  llt_.compute(a);
  if (llt_.info() == Eigen::Success) {
    return;
  }
  const double scale = std::abs(a.trace()) / static_cast<double>(n);
  for (double rel = kJitterStart; rel <= kJitterMax * 1.0000001; rel *= 10.0) {
    jitter_ = rel * (scale > 0.0 ? scale : 1.0);
    MatrixXd shifted = a;
    shifted.diagonal().array() += jitter_;
    llt_.compute(shifted);
    if (llt_.info() == Eigen::Success) {
      return;
    }
  }
  throw ConditioningError("cholesky failed after jitter escalation to " +
                          std::to_string(jitter_));
}

double JitteredCholesky::log_det() const {
  if (llt_.rows() == 0) {
    return 0.0;
  }
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

MatrixXd JitteredCholesky::solve_lower(const MatrixXd &b) const {
  return llt_.matrixL().solve(b);
}

EigenPairs top_eigenpairs(const MatrixXd &a, Eigen::Index m) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) {
    throw DomainError("eigendecomposition: matrix is not square");
  }
  if (m < 1 || m > n) {
    throw DomainError("eigendecomposition: requested " + std::to_string(m) +
                      " pairs of a " + std::to_string(n) + "x" +
                      std::to_string(n) + " matrix");
  }
  MatrixXd work = a;
  std::vector<double> w(static_cast<std::size_t>(n));
  MatrixXd z(n, m);
  std::vector<lapack_int> support(static_cast<std::size_t>(2 * m));
  lapack_int found = 0;
  const auto ln = static_cast<lapack_int>(n);
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', ln, work.data(), ln, 0.0, 0.0,
      static_cast<lapack_int>(n - m + 1), ln, 0.0, &found, w.data(), z.data(),
      ln, support.data());
  if (info != 0 || found != m) {
    throw ConditioningError("dsyevr failed with info " + std::to_string(info));
  }
  // LAPACK returns ascending order.
  EigenPairs out;
  out.values.resize(m);
  out.vectors.resize(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    out.values(k) = w[static_cast<std::size_t>(m - 1 - k)];
    out.vectors.col(k) = z.col(m - 1 - k);
  }
  return out;
}

bool is_symmetric(const MatrixXd &a, double tol) {
  if (a.rows() != a.cols()) {
    return false;
  }
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double gaussian_log_density(const VectorXd &y, const JitteredCholesky &chol) {
  const auto n = static_cast<double>(y.size());
  const VectorXd white = chol.llt().matrixL().solve(y);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * chol.log_det() -
         0.5 * white.squaredNorm();
}

double gaussian_kl(const VectorXd &m0, const MatrixXd &s0, const VectorXd &m1,
                   const MatrixXd &s1) {
  const JitteredCholesky c0(s0);
  const JitteredCholesky c1(s1);
  const auto k = static_cast<double>(m0.size());
  const MatrixXd s1inv_s0 = c1.solve(s0);
  const VectorXd diff = m1 - m0;
  return 0.5 * (s1inv_s0.trace() + diff.dot(c1.solve(diff)) - k +
                c1.log_det() - c0.log_det());
}

}  // namespace asvb
