#include "asvb/inducing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

constexpr Eigen::Index kKlOracleMaxN = 500;

// Whitened quantities shared by the bound, the fit and the KL:
// P = L^{-1} K_uf K_fu L^{-T}, b = L^{-1} K_uf y, B = I + P / s2.
struct Whitened {
  JitteredCholesky kuu_chol;
  MatrixXd p;
  VectorXd b;
  JitteredCholesky b_chol;
};

Whitened whiten(const MatrixXd &kuu, const InducingStats &stats,
                double sigma_sq) {
  Whitened w{JitteredCholesky(kuu), {}, {}, {}};
  const MatrixXd half = w.kuu_chol.solve_lower(stats.cross_gram);
  w.p = w.kuu_chol.solve_lower(half.transpose());
  w.p = 0.5 * (w.p + w.p.transpose()).eval();
  w.b = w.kuu_chol.solve_lower(stats.cross_y);
  MatrixXd bmat = w.p / sigma_sq;
  bmat.diagonal().array() += 1.0;
  w.b_chol = JitteredCholesky(bmat);
  return w;
}

void check_data(const InducingModel &model, const Dataset &data) {
  data.validate();
  if (data.size() < 1) {
    throw ValidationError("inducing fit: need at least one observation");
  }
  if (model.n() != data.size()) {
    throw ValidationError("inducing fit: model built for " +
                          std::to_string(model.n()) + " points, data has " +
                          std::to_string(data.size()));
  }
}

}  // namespace

MatrixXd InducingModel::nystrom() const {
  const JitteredCholesky chol(kuu);
  const MatrixXd w = chol.solve_lower(kuf);
  return w.transpose() * w;
}

MatrixXd InducingModel::cross_to(std::span<const double> query) const {
  if (!kernel) {
    throw ValidationError(
        "inducing model has no kernel; cannot evaluate at new points");
  }
  if (flavor == FeatureFlavor::Population) {
    const auto &sk = std::get<SeriesKernel>(*kernel);
    const MatrixXd phi = sk.prior.basis().design(query, m());
    return sk.prior.variances(m()).asDiagonal() * phi.transpose();
  }
  return vectors.transpose() * cross_kernel(*kernel, inputs, query);
}

std::int64_t default_population_truncation(Eigen::Index m) {
  return std::max<std::int64_t>(10 * static_cast<std::int64_t>(m), 1000);
}

InducingModel population_features(const SeriesPrior &prior,
                                  std::span<const double> x, Eigen::Index m,
                                  std::optional<std::int64_t> truncation) {
  if (m < 1) {
    throw DomainError("population_features: m must be >= 1");
  }
  if (const auto s = prior.support(); s && m > *s) {
    throw DomainError("population_features: m = " + std::to_string(m) +
                      " exceeds the prior support D = " + std::to_string(*s));
  }
  const std::int64_t j_max = truncation.value_or(default_population_truncation(m));
  if (j_max < m) {
    throw DomainError("population_features: truncation below m");
  }
  SeriesKernel sk{prior, j_max};
  const Eigen::Index terms = sk.terms();

  InducingModel model;
  model.flavor = FeatureFlavor::Population;
  const VectorXd s2 = prior.variances(terms);
  model.kuu = s2.head(m).asDiagonal();

  const auto n = static_cast<Eigen::Index>(x.size());
  model.kuf.resize(m, n);
  model.kff_diag.resize(n);
  VectorXd row(terms);
  for (Eigen::Index i = 0; i < n; ++i) {
    prior.basis().row_into(x[static_cast<std::size_t>(i)], row);
    model.kuf.col(i) = s2.head(m).cwiseProduct(row.head(m));
    model.kff_diag(i) = s2.dot(row.cwiseAbs2());
  }
  model.kernel = KernelSpec(sk);
  model.inputs.assign(x.begin(), x.end());
  return model;
}

InducingModel sample_features(const MatrixXd &kff, Eigen::Index m) {
  const Eigen::Index n = kff.rows();
  if (!is_symmetric(kff)) {
    throw DomainError("sample_features: K_ff is not symmetric");
  }
  if (m < 1 || m > n) {
    throw DomainError("sample_features: need 1 <= m <= n");
  }
  EigenPairs pairs = top_eigenpairs(kff, m);

  InducingModel model;
  model.flavor = FeatureFlavor::Sample;
  const double top = std::max(pairs.values(0), 0.0);
  const double cutoff = static_cast<double>(n) *
                        std::numeric_limits<double>::epsilon() * top;
  Eigen::Index keep = 0;
  while (keep < m && pairs.values(keep) > cutoff) {
    ++keep;
  }
  if (keep == 0) {
    throw ConditioningError("sample_features: K_ff is numerically zero");
  }
  if (keep < m) {
    model.warnings.push_back("sample_features: K_ff has numerical rank " +
                             std::to_string(keep) + " < m = " +
                             std::to_string(m) + "; using m = " +
                             std::to_string(keep));
  }
  model.eigvals = pairs.values.head(keep);
  model.vectors = pairs.vectors.leftCols(keep);
  model.kuu = model.eigvals.asDiagonal();
  model.kuf = model.eigvals.asDiagonal() * model.vectors.transpose();
  model.kff_diag = kff.diagonal();
  return model;
}

InducingModel sample_features(const KernelSpec &kernel,
                              std::span<const double> x, Eigen::Index m) {
  InducingModel model = sample_features(kernel_matrix(kernel, x), m);
  model.kernel = kernel;
  model.inputs.assign(x.begin(), x.end());
  return model;
}

InducingStats inducing_stats(const InducingModel &model, const VectorXd &y) {
  InducingStats s;
  s.cross_gram = model.kuf * model.kuf.transpose();
  s.cross_y = model.kuf * y;
  s.yy = y.squaredNorm();
  s.kff_trace = model.kff_diag.sum();
  s.n = y.size();
  return s;
}

double collapsed_elbo(const MatrixXd &kuu, const InducingStats &stats,
                      double sigma_sq) {
  if (!(sigma_sq > 0.0)) {
    throw DomainError("collapsed_elbo: sigma_sq must be positive");
  }
  const Whitened w = whiten(kuu, stats, sigma_sq);
  const auto n = static_cast<double>(stats.n);
  const VectorXd c = w.b_chol.solve_lower(w.b);
  const double log_det = n * std::log(sigma_sq) + w.b_chol.log_det();
  const double quad =
      stats.yy / sigma_sq - c.squaredNorm() / (sigma_sq * sigma_sq);
  const double trace_gap = stats.kff_trace - w.p.trace();
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
         0.5 * quad - 0.5 * trace_gap / sigma_sq;
}

double elbo_lambda(const InducingModel &model, const Dataset &data) {
  check_data(model, data);
  return collapsed_elbo(model.kuu, inducing_stats(model, data.y),
                        data.sigma_sq);
}

VariationalGP titsias_fit(const InducingModel &model, const Dataset &data) {
  check_data(model, data);
  const InducingStats stats = inducing_stats(model, data.y);
  const Whitened w = whiten(model.kuu, stats, data.sigma_sq);
  const MatrixXd l = w.kuu_chol.matrix_l();

  VariationalGP q{model, {}, {}, data.sigma_sq};
  // Sigma = L B^{-1} L^T, mu = L B^{-1} b / s2.
  const MatrixXd binv_lt = w.b_chol.solve(l.transpose());
  q.sigma = l * binv_lt;
  q.sigma = 0.5 * (q.sigma + q.sigma.transpose()).eval();
  q.mu = l * w.b_chol.solve(w.b) / data.sigma_sq;
  return q;
}

GaussianPosterior predict(const VariationalGP &q,
                          std::span<const double> query) {
  if (query.empty()) {
    throw ValidationError("predict: empty query");
  }
  const InducingModel &model = q.model;
  const JitteredCholesky chol(model.kuu);
  const MatrixXd a = chol.solve_lower(model.cross_to(query));  // L^{-1} K_u*
  const MatrixXd l_inv_mu = chol.solve_lower(q.mu);
  // L^{-1} Sigma L^{-T}
  const MatrixXd half = chol.solve_lower(q.sigma);
  const MatrixXd s_white = chol.solve_lower(half.transpose());
  MatrixXd correction = -s_white;
  correction.diagonal().array() += 1.0;

  GaussianPosterior post;
  post.query.assign(query.begin(), query.end());
  post.mean = a.transpose() * l_inv_mu;
  post.cov = cross_kernel(*model.kernel, query, query) -
             a.transpose() * correction * a;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  if (model.flavor == FeatureFlavor::Population) {
    // K_xu K_uu^{-1} = phi_{1:m}(x)^T, so mu holds the mean's coefficients.
    post.mean_coefficients = q.mu;
  }
  return post;
}

VectorXd predict_mean(const VariationalGP &q, std::span<const double> query) {
  const JitteredCholesky chol(q.model.kuu);
  const VectorXd alpha = chol.solve(q.mu);
  return q.model.cross_to(query).transpose() * alpha;
}

double elbo_at(const VariationalGP &q, const Dataset &data) {
  check_data(q.model, data);
  const InducingModel &model = q.model;
  const InducingStats stats = inducing_stats(model, data.y);
  const JitteredCholesky chol(model.kuu);
  const double s2 = data.sigma_sq;
  const auto n = static_cast<double>(stats.n);
  const auto m = static_cast<double>(model.m());

  // P = K_fu K_uu^{-1}; everything below is expressed through the stats.
  const VectorXd alpha = chol.solve(q.mu);          // K_uu^{-1} mu
  const MatrixXd gram_sol = chol.solve(stats.cross_gram);  // K_uu^{-1} G
  const MatrixXd ptp = chol.solve(gram_sol.transpose());    // K_uu^{-1} G K_uu^{-1}
  const double resid = stats.yy - 2.0 * alpha.dot(stats.cross_y) +
                       alpha.dot(stats.cross_gram * alpha);
  const double trace_q = gram_sol.trace();
  const double trace_sigma = (ptp * q.sigma).trace();
  const double expected_ll =
      -0.5 * n * std::log(2.0 * std::numbers::pi * s2) -
      0.5 * (resid + stats.kff_trace - trace_q + trace_sigma) / s2;

  const JitteredCholesky sigma_chol(q.sigma);
  const double kl = 0.5 * (chol.solve(q.sigma).trace() + q.mu.dot(alpha) - m +
                           chol.log_det() - sigma_chol.log_det());
  return expected_ll - kl;
}

double kl_to_posterior(const VariationalGP &q, const Dataset &data,
                       const KernelSpec &kernel) {
  if (data.size() > kKlOracleMaxN) {
    throw ValidationError("kl_to_posterior is an oracle for n <= 500");
  }
  return log_evidence(kernel, data) - elbo_at(q, data);
}

}  // namespace asvb
