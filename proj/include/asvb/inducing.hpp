#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asvb/exact.hpp"

namespace asvb {

enum class FeatureFlavor { Population, Sample };

/// Covariance blocks of m linear inducing functionals u of the prior GP.
///
/// Population features use u_j = <f, phi_j>, giving K_uu = diag(s_j^2) and
/// (K_uf)_{ji} = s_j^2 phi_j(x_i). Sample features use u_j = v_j^T f(x) for
/// the leading eigenvectors v_j of K_ff, giving K_uu = diag(mu_j) and
/// K_uf = diag(mu) V^T.
struct InducingModel {
  FeatureFlavor flavor = FeatureFlavor::Population;
  MatrixXd kuu;
  MatrixXd kuf;
  VectorXd kff_diag;

  // Sample flavor only.
  MatrixXd vectors;
  VectorXd eigvals;

  // Prior kernel and training inputs, needed to evaluate K_{*u} at new
  // points. Absent when the model was built from a bare matrix.
  std::optional<KernelSpec> kernel;
  std::vector<double> inputs;

  std::vector<std::string> warnings;

  Eigen::Index m() const { return kuu.rows(); }
  Eigen::Index n() const { return kuf.cols(); }

  /// Nystrom matrix K_fu K_uu^{-1} K_uf (n x n, oracle scale only).
  MatrixXd nystrom() const;
  /// K_{u*} for query points (m x q).
  MatrixXd cross_to(std::span<const double> query) const;
};

/// Default prior-tail truncation for population features: max(10 m, 1000).
std::int64_t default_population_truncation(Eigen::Index m);

/// Population spectral features. `truncation` (default as above) is the
/// number of series terms used for the prior variances k(x_i, x_i).
InducingModel population_features(const SeriesPrior &prior,
                                  std::span<const double> x, Eigen::Index m,
                                  std::optional<std::int64_t> truncation = {});

/// Sample spectral features from a kernel matrix. Eigenvalues that are
/// numerically zero are dropped (with a warning), reducing m.
InducingModel sample_features(const MatrixXd &kff, Eigen::Index m);

/// Sample features for a kernel at the given inputs; keeps the kernel so
/// the model can predict at new points.
InducingModel sample_features(const KernelSpec &kernel,
                              std::span<const double> x, Eigen::Index m);

/// Data statistics the collapsed bound depends on; independent of sigma^2.
struct InducingStats {
  MatrixXd cross_gram;  // K_uf K_fu
  VectorXd cross_y;     // K_uf y
  double yy = 0.0;
  double kff_trace = 0.0;
  Eigen::Index n = 0;
};

InducingStats inducing_stats(const InducingModel &model, const VectorXd &y);

/// Collapsed bound
///   log N(y; 0, Q_ff + s2 I) - tr(K_ff - Q_ff) / (2 s2)
/// evaluated through the m x m Woodbury form.
double collapsed_elbo(const MatrixXd &kuu, const InducingStats &stats,
                      double sigma_sq);

double elbo_lambda(const InducingModel &model, const Dataset &data);

/// Member N(mu, Sigma) of the inducing class.
struct VariationalGP {
  InducingModel model;
  VectorXd mu;
  MatrixXd sigma;
  double sigma_sq = 1.0;
};

/// KL-optimal (mu, Sigma) for fixed hyperparameters:
///   A = K_uu + K_uf K_fu / s2,  Sigma = K_uu A^{-1} K_uu,
///   mu = K_uu A^{-1} K_uf y / s2.
VariationalGP titsias_fit(const InducingModel &model, const Dataset &data);

/// Predictive law of q: mean K_xu K_uu^{-1} mu, covariance
/// k(x,x') - K_xu K_uu^{-1} (K_uu - Sigma) K_uu^{-1} K_ux'.
GaussianPosterior predict(const VariationalGP &q, std::span<const double> query);

/// Mean only, for large evaluation grids.
VectorXd predict_mean(const VariationalGP &q, std::span<const double> query);

/// Uncollapsed ELBO_lambda at the given (mu, Sigma).
double elbo_at(const VariationalGP &q, const Dataset &data);

/// log_evidence - elbo_at(q): the KL from q to the exact posterior.
double kl_to_posterior(const VariationalGP &q, const Dataset &data,
                       const KernelSpec &kernel);

}  // namespace asvb
