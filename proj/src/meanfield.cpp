#include "asvb/meanfield.hpp"

#include <cmath>
#include <numbers>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

constexpr Eigen::Index kKlOracleMaxN = 2000;

void check_dims(const DesignMatrix &dm, const Dataset &data) {
  data.validate();
  if (dm.n() != data.size()) {
    throw ValidationError("design matrix and data disagree on n");
  }
}

}  // namespace

DesignMatrix design_matrix(const FourierBasis &basis, std::span<const double> x,
                           Eigen::Index dimension) {
  if (dimension < 1) {
    throw DomainError("design_matrix: D must be >= 1");
  }
  DesignMatrix dm;
  dm.phi = basis.design(x, dimension);
  dm.gram = dm.phi.transpose() * dm.phi;
  return dm;
}

MeanFieldPosterior tie_mean(const VectorXd &sigma_diag, const DesignMatrix &dm,
                            const Dataset &data) {
  MeanFieldPosterior q;
  q.sigma_diag = sigma_diag;
  q.mu = sigma_diag.cwiseProduct(dm.phi.transpose() * data.y) / data.sigma_sq;
  return q;
}

double mf_elbo(const MeanFieldPosterior &q, const DesignMatrix &dm,
               const Dataset &data, double hyper_mass) {
  check_dims(dm, data);
  if (!(hyper_mass > 0.0 && hyper_mass <= 1.0)) {
    throw DomainError("mf_elbo: hyper_mass must lie in (0, 1]");
  }
  if (q.dimension() != dm.dimension() || q.mu.size() != dm.dimension()) {
    throw ValidationError("mf_elbo: dimension mismatch");
  }
  if ((q.sigma_diag.array() <= 0.0).any()) {
    throw DomainError("mf_elbo: variances must be positive");
  }
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(dm.dimension());
  const double s2 = data.sigma_sq;
  const double trace_fit = dm.gram.diagonal().dot(q.sigma_diag);
  const double resid = (dm.phi * q.mu - data.y).squaredNorm();
  const double log_det_dsigma = (d * q.sigma_diag.array()).log().sum();
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) -
         0.5 * (trace_fit + resid) / s2 -
         0.5 * (-log_det_dsigma - d + d * q.sigma_diag.sum() +
                d * q.mu.squaredNorm()) +
         std::log(hyper_mass);
}

MeanFieldFit mf_fit(const DesignMatrix &dm, const Dataset &data,
                    double hyper_mass, const MeanFieldOptions &opts) {
  check_dims(dm, data);
  if (data.size() < 1) {
    throw ValidationError("mf_fit: need at least one observation");
  }
  const Eigen::Index dim = dm.dimension();
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(dim);
  const double s2 = data.sigma_sq;
  const VectorXd b = dm.phi.transpose() * data.y / s2;
  const MatrixXd &g = dm.gram;

  VectorXd s = VectorXd::Constant(dim, 1.0 / (d + n / s2));
  VectorXd mu = s.cwiseProduct(b);
  // g_mu = G mu, maintained incrementally.
  VectorXd g_mu = g * mu;

  MeanFieldFit fit;
  fit.q = {s, mu};
  fit.elbo = mf_elbo(fit.q, dm, data, hyper_mass);
  fit.trace.push_back(fit.elbo);

  // Along coordinate j the objective is 0.5 log s - a s - c s^2 with
  //   c = b_j^2 (G_jj / s2 + D) / 2,
  //   a = G_jj / (2 s2) + D / 2 + b_j (G mu)_{-j} / s2 - b_j^2,
  // maximized at s = 1 / (a + sqrt(a^2 + 4c)).
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double gjj = g(j, j);
      const double bj = b(j);
      const double off = g_mu(j) - gjj * mu(j);
      const double c = 0.5 * bj * bj * (gjj / s2 + d);
      const double a = 0.5 * gjj / s2 + 0.5 * d + bj * off / s2 - bj * bj;
      const double root = std::sqrt(a * a + 4.0 * c);
      double next = a > 0.0 ? 1.0 / (a + root) : (root - a) / (4.0 * c);
      if (!(next > 0.0) || !std::isfinite(next)) {
        continue;
      }
      const double delta_mu = next * bj - mu(j);
      s(j) = next;
      mu(j) = next * bj;
      g_mu += g.col(j) * delta_mu;
    }
    const MeanFieldPosterior candidate{s, mu};
    const double value = mf_elbo(candidate, dm, data, hyper_mass);
    fit.sweeps = sweep;
    if (value < fit.elbo) {
      // Rounding noise at the fixed point; keep the better iterate.
      fit.converged = true;
      break;
    }
    fit.q = candidate;
    fit.trace.push_back(value);
    const double gain = value - fit.elbo;
    fit.elbo = value;
    if (gain < opts.tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

MeanFieldPosterior mf_witness(const DesignMatrix &dm, const Dataset &data) {
  check_dims(dm, data);
  if (data.size() < 1) {
    throw ValidationError("mf_witness: need at least one observation");
  }
  const auto n = static_cast<double>(data.size());
  const auto d = static_cast<double>(dm.dimension());
  return tie_mean(VectorXd::Constant(dm.dimension(), 1.0 / (d + n / data.sigma_sq)),
                  dm, data);
}

double mf_kl_exact(const MeanFieldPosterior &q, const DesignMatrix &dm,
                   const Dataset &data) {
  check_dims(dm, data);
  if (data.size() > kKlOracleMaxN) {
    throw ValidationError("mf_kl_exact is an oracle for n <= 2000");
  }
  const auto d = static_cast<double>(dm.dimension());
  const double s2 = data.sigma_sq;
  // Sigma_hat^{-1} = D I + Phi^T Phi / s2
  MatrixXd prec = dm.gram / s2;
  prec.diagonal().array() += d;
  const JitteredCholesky prec_chol(prec);
  const VectorXd mu_hat = prec_chol.solve(dm.phi.transpose() * data.y) / s2;
  const VectorXd diff = q.mu - mu_hat;
  // log |Sigma_hat| / |Sigma| = -log |prec| - sum log sigma_j
  const double log_ratio = -prec_chol.log_det() - q.sigma_diag.array().log().sum();
  const double trace_term = prec.diagonal().dot(q.sigma_diag);
  const double quad = diff.dot(prec * diff);
  return 0.5 * (log_ratio - d + trace_term + quad);
}

GaussianPosterior mf_predict(const MeanFieldPosterior &q,
                             std::span<const double> query) {
  const FourierBasis basis;
  const MatrixXd pq = basis.design(query, q.dimension());
  GaussianPosterior post;
  post.query.assign(query.begin(), query.end());
  post.mean = pq * q.mu;
  post.cov = pq * q.sigma_diag.asDiagonal() * pq.transpose();
  post.mean_coefficients = q.mu;
  return post;
}

}  // namespace asvb
