#pragma once

#include <span>

#include "asvb/exact.hpp"

namespace asvb {

/// Phi (n x D, row i = phi_{1:D}(x_i)^T) with its Gram matrix cached.
struct DesignMatrix {
  MatrixXd phi;
  MatrixXd gram;

  Eigen::Index dimension() const { return phi.cols(); }
  Eigen::Index n() const { return phi.rows(); }
};

DesignMatrix design_matrix(const FourierBasis &basis, std::span<const double> x,
                           Eigen::Index dimension);

/// Diagonal-covariance Gaussian on the first D coefficients with the mean
/// tied to mu = Sigma Phi^T y / s2.
struct MeanFieldPosterior {
  VectorXd sigma_diag;
  VectorXd mu;

  Eigen::Index dimension() const { return sigma_diag.size(); }
};

/// Rebuilds the tied mean for the given variances.
MeanFieldPosterior tie_mean(const VectorXd &sigma_diag, const DesignMatrix &dm,
                            const Dataset &data);

/// ELBO of q for the truncated prior of dimension D, including log pi(D).
double mf_elbo(const MeanFieldPosterior &q, const DesignMatrix &dm,
               const Dataset &data, double hyper_mass);

struct MeanFieldFit {
  MeanFieldPosterior q;
  double elbo = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> trace;  // ELBO after initialization and each accepted sweep
};

struct MeanFieldOptions {
  double tolerance = 1e-10;
  int max_sweeps = 500;
};

/// Coordinate ascent over the log-variances; each coordinate step moves to
/// the exact maximizer along that coordinate, so the trace is monotone.
MeanFieldFit mf_fit(const DesignMatrix &dm, const Dataset &data,
                    double hyper_mass, const MeanFieldOptions &opts = {});

/// Sigma = (D + n / s2)^{-1} I with tied mean.
MeanFieldPosterior mf_witness(const DesignMatrix &dm, const Dataset &data);

/// Closed-form KL(q || exact truncated posterior).
double mf_kl_exact(const MeanFieldPosterior &q, const DesignMatrix &dm,
                   const Dataset &data);

/// Mean-field predictive law at query points.
GaussianPosterior mf_predict(const MeanFieldPosterior &q,
                             std::span<const double> query);

}  // namespace asvb
