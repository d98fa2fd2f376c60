#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "asvb/basis.hpp"
#include "asvb/linalg.hpp"

namespace asvb {

/// Regression data y_i = f(x_i) + N(0, sigma_sq).
struct Dataset {
  std::vector<double> x;
  VectorXd y;
  double sigma_sq = 1.0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(x.size()); }
  Dataset with_sigma_sq(double s2) const;
  /// Throws ValidationError unless |x| = |y| and sigma_sq > 0.
  void validate() const;
};

/// k(x, x') = nu * exp(-(x - x')^2 / tau^2)
struct SquaredExponential {
  double nu;
  double tau;
};

/// k(x, x') = sum_{j <= J} s_j^2 phi_j(x) phi_j(x')
struct SeriesKernel {
  SeriesPrior prior;
  std::int64_t truncation;

  /// Number of non-zero terms actually summed.
  Eigen::Index terms() const;
};

using KernelSpec = std::variant<SquaredExponential, SeriesKernel>;

double kernel_value(const KernelSpec &kernel, double x, double xp);
VectorXd kernel_diag(const KernelSpec &kernel, std::span<const double> pts);
MatrixXd cross_kernel(const KernelSpec &kernel, std::span<const double> a,
                      std::span<const double> b);
/// Symmetric kernel matrix. With `verify_psd` the matrix is also run through
/// the jittered Cholesky and ConditioningError propagates.
MatrixXd kernel_matrix(const KernelSpec &kernel, std::span<const double> pts,
                       bool verify_psd = false);

/// Finite summary of a Gaussian process law at a set of query points.
struct GaussianPosterior {
  std::vector<double> query;
  VectorXd mean;
  MatrixXd cov;
  /// Basis coefficients of the mean, when the posterior is a finite series.
  std::optional<VectorXd> mean_coefficients;

  VectorXd variance() const { return cov.diagonal().cwiseMax(0.0); }
  VectorXd lower95() const;
  VectorXd upper95() const;
};

inline constexpr double kBandZ = 1.96;

/// Kernel-form conditioning: mean K_*f (K_ff + s2 I)^{-1} y and covariance
/// K_** - K_*f (K_ff + s2 I)^{-1} K_f*.
GaussianPosterior exact_posterior(const KernelSpec &kernel, const Dataset &data,
                                  std::span<const double> query);

/// Series-form posterior for the truncated prior of dimension D:
/// mean phi(x)^T (s2 D I + Phi^T Phi)^{-1} Phi^T y,
/// cov  phi(x)^T (D I + Phi^T Phi / s2)^{-1} phi(x').
GaussianPosterior truncated_posterior(std::int64_t dimension,
                                      const Dataset &data,
                                      std::span<const double> query);

/// log N(y; 0, K_ff + s2 I).
double log_evidence(const KernelSpec &kernel, const Dataset &data);

/// One hyperparameter value and the kernel it induces.
struct Candidate {
  double lambda;
  KernelSpec kernel;
};

struct Failure {
  double lambda;
  std::string reason;
};

struct MmleResult {
  std::size_t index = 0;  // into the candidate list
  double lambda = 0.0;
  std::vector<std::optional<double>> log_evidences;  // nullopt = failed
  std::vector<Failure> failures;
};

/// argmax of log_evidence over the candidates, ties to the earliest entry.
/// Failing candidates are excluded and listed; all failing is an error.
MmleResult mmle_select(std::span<const Candidate> candidates,
                       const Dataset &data);

struct EmpiricalBayes {
  MmleResult selection;
  GaussianPosterior posterior;
};

/// exact_posterior at the MMLE.
EmpiricalBayes eb_posterior(std::span<const Candidate> candidates,
                            const Dataset &data, std::span<const double> query);

struct HierarchicalPosterior {
  std::vector<double> lambdas;
  std::vector<double> weights;
  std::vector<std::optional<double>> log_evidences;
  std::vector<GaussianPosterior> components;  // empty entry for failures
  std::vector<Failure> failures;

  std::size_t argmax_weight() const;
  /// Mixture mean at the query points.
  VectorXd mean() const;
};

/// Normalized weights exp(v_i - logsumexp(v)); -inf entries get weight 0.
std::vector<double> normalize_log_weights(std::span<const double> log_w);

/// Exact mixture posterior for the discrete hyper-prior `masses`
/// (aligned with `candidates`, positive, summing to one).
HierarchicalPosterior hierarchical_posterior(
    std::span<const Candidate> candidates, std::span<const double> masses,
    const Dataset &data, std::span<const double> query);

}  // namespace asvb
