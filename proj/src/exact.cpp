#include "asvb/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

// Phi * diag(s^2) for a series kernel, so that K = Phi S Phi^T.
MatrixXd weighted_design(const SeriesKernel &k, std::span<const double> pts,
                         VectorXd *variances) {
  const Eigen::Index terms = k.terms();
  *variances = k.prior.variances(terms);
  return k.prior.basis().design(pts, terms);
}

}  // namespace

Dataset Dataset::with_sigma_sq(double s2) const {
  Dataset out = *this;
  out.sigma_sq = s2;
  return out;
}

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(x.size()) != y.size()) {
    throw ValidationError("dataset: x and y lengths differ");
  }
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
    throw ValidationError("dataset: sigma_sq must be positive and finite");
  }
}

Eigen::Index SeriesKernel::terms() const {
  std::int64_t t = truncation;
  if (const auto s = prior.support()) {
    t = std::min(t, *s);
  }
  if (t < 1) {
    throw DomainError("series kernel: truncation must be >= 1");
  }
  return static_cast<Eigen::Index>(t);
}

double kernel_value(const KernelSpec &kernel, double x, double xp) {
  return std::visit(
      Overloaded{
          [&](const SquaredExponential &se) {
            const double d = (x - xp) / se.tau;
            return se.nu * std::exp(-d * d);
          },
          [&](const SeriesKernel &sk) {
            const Eigen::Index t = sk.terms();
            const VectorXd a = sk.prior.basis().row(x, t);
            const VectorXd b = sk.prior.basis().row(xp, t);
            return (a.array() * b.array() * sk.prior.variances(t).array())
                .sum();
          },
      },
      kernel);
}

VectorXd kernel_diag(const KernelSpec &kernel, std::span<const double> pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  return std::visit(
      Overloaded{
          [&](const SquaredExponential &se) -> VectorXd {
            return VectorXd::Constant(n, se.nu);
          },
          [&](const SeriesKernel &sk) -> VectorXd {
            VectorXd s2;
            const MatrixXd phi = weighted_design(sk, pts, &s2);
            return phi.array().square().matrix() * s2;
          },
      },
      kernel);
}

MatrixXd cross_kernel(const KernelSpec &kernel, std::span<const double> a,
                      std::span<const double> b) {
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  return std::visit(
      Overloaded{
          [&](const SquaredExponential &se) -> MatrixXd {
            MatrixXd k(na, nb);
            const double inv = 1.0 / (se.tau * se.tau);
            for (Eigen::Index j = 0; j < nb; ++j) {
              for (Eigen::Index i = 0; i < na; ++i) {
                const double d = a[i] - b[j];
                k(i, j) = se.nu * std::exp(-d * d * inv);
              }
            }
            return k;
          },
          [&](const SeriesKernel &sk) -> MatrixXd {
            VectorXd s2;
            const MatrixXd pa = weighted_design(sk, a, &s2);
            const MatrixXd pb = sk.prior.basis().design(b, sk.terms());
            return pa * s2.asDiagonal() * pb.transpose();
          },
      },
      kernel);
}

MatrixXd kernel_matrix(const KernelSpec &kernel, std::span<const double> pts,
                       bool verify_psd) {
  if (pts.empty()) {
    throw DomainError("kernel_matrix: no points");
  }
  MatrixXd k = cross_kernel(kernel, pts, pts);
  // Exact symmetry regardless of rounding in the product form.
  k = 0.5 * (k + k.transpose()).eval();
  if (verify_psd) {
    JitteredCholesky check(k);
  }
  return k;
}

VectorXd GaussianPosterior::lower95() const {
  return mean - kBandZ * variance().cwiseSqrt();
}

VectorXd GaussianPosterior::upper95() const {
  return mean + kBandZ * variance().cwiseSqrt();
}

GaussianPosterior exact_posterior(const KernelSpec &kernel, const Dataset &data,
                                  std::span<const double> query) {
  data.validate();
  if (data.size() < 1) {
    throw ValidationError("exact_posterior: need at least one observation");
  }
  MatrixXd kff = kernel_matrix(kernel, data.x);
  kff.diagonal().array() += data.sigma_sq;
  const JitteredCholesky chol(kff);
  const MatrixXd kqf = cross_kernel(kernel, query, data.x);

  GaussianPosterior post;
  post.query.assign(query.begin(), query.end());
  post.mean = kqf * chol.solve(data.y);
  const MatrixXd white = chol.solve_lower(kqf.transpose());
  post.cov = cross_kernel(kernel, query, query) - white.transpose() * white;
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  return post;
}

GaussianPosterior truncated_posterior(std::int64_t dimension,
                                      const Dataset &data,
                                      std::span<const double> query) {
  data.validate();
  if (dimension < 1) {
    throw DomainError("truncated_posterior: dimension must be >= 1");
  }
  const FourierBasis basis;
  const auto d = static_cast<Eigen::Index>(dimension);
  const MatrixXd phi = basis.design(data.x, d);
  const MatrixXd gram = phi.transpose() * phi;
  const VectorXd phity = phi.transpose() * data.y;
  const double dd = static_cast<double>(dimension);

  MatrixXd mean_sys = gram;
  mean_sys.diagonal().array() += data.sigma_sq * dd;
  MatrixXd cov_sys = gram / data.sigma_sq;
  cov_sys.diagonal().array() += dd;

  const JitteredCholesky mean_chol(mean_sys);
  const JitteredCholesky cov_chol(cov_sys);

  GaussianPosterior post;
  post.query.assign(query.begin(), query.end());
  const VectorXd coef = mean_chol.solve(phity);
  const MatrixXd pq = basis.design(query, d);
  post.mean = pq * coef;
  post.cov = pq * cov_chol.solve(pq.transpose());
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();
  post.mean_coefficients = coef;
  return post;
}

double log_evidence(const KernelSpec &kernel, const Dataset &data) {
  data.validate();
  if (data.size() < 1) {
    throw ValidationError("log_evidence: need at least one observation");
  }
  MatrixXd k = kernel_matrix(kernel, data.x);
  k.diagonal().array() += data.sigma_sq;
  const JitteredCholesky chol(k);
  return gaussian_log_density(data.y, chol);
}

MmleResult mmle_select(std::span<const Candidate> candidates,
                       const Dataset &data) {
  if (candidates.empty()) {
    throw ValidationError("mmle_select: empty candidate set");
  }
  MmleResult out;
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    try {
      const double ev = log_evidence(candidates[i].kernel, data);
      out.log_evidences.emplace_back(ev);
      if (!any || ev > best) {
        best = ev;
        out.index = i;
        any = true;
      }
    } catch (const ConditioningError &e) {
      out.log_evidences.emplace_back(std::nullopt);
      out.failures.push_back({candidates[i].lambda, e.what()});
    }
  }
  if (!any) {
    throw ConditioningError("mmle_select: every candidate failed");
  }
  out.lambda = candidates[out.index].lambda;
  return out;
}

EmpiricalBayes eb_posterior(std::span<const Candidate> candidates,
                            const Dataset &data,
                            std::span<const double> query) {
  EmpiricalBayes eb{mmle_select(candidates, data), {}};
  eb.posterior =
      exact_posterior(candidates[eb.selection.index].kernel, data, query);
  return eb;
}

std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(log_w.size(), 0.0);
  if (!std::isfinite(top)) {
    return w;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    w[i] = std::isfinite(log_w[i]) ? std::exp(log_w[i] - top) : 0.0;
    total += w[i];
  }
  for (double &v : w) {
    v /= total;
  }
  return w;
}

std::size_t HierarchicalPosterior::argmax_weight() const {
  return static_cast<std::size_t>(
      std::max_element(weights.begin(), weights.end()) - weights.begin());
}

VectorXd HierarchicalPosterior::mean() const {
  VectorXd out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) {
      continue;
    }
    if (out.size() == 0) {
      out = VectorXd::Zero(components[i].mean.size());
    }
    out += weights[i] * components[i].mean;
  }
  return out;
}

HierarchicalPosterior hierarchical_posterior(
    std::span<const Candidate> candidates, std::span<const double> masses,
    const Dataset &data, std::span<const double> query) {
  if (candidates.empty() || candidates.size() != masses.size()) {
    throw ValidationError("hierarchical_posterior: masses must align with "
                          "a nonempty candidate list");
  }
  double total = 0.0;
  for (double m : masses) {
    if (!(m > 0.0)) {
      throw ValidationError("hierarchical_posterior: masses must be positive");
    }
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("hierarchical_posterior: masses must sum to one");
  }

  HierarchicalPosterior out;
  std::vector<double> log_w;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.lambdas.push_back(candidates[i].lambda);
    try {
      const double ev = log_evidence(candidates[i].kernel, data);
      out.log_evidences.emplace_back(ev);
      log_w.push_back(std::log(masses[i]) + ev);
      out.components.push_back(
          exact_posterior(candidates[i].kernel, data, query));
    } catch (const ConditioningError &e) {
      out.log_evidences.emplace_back(std::nullopt);
      log_w.push_back(-std::numeric_limits<double>::infinity());
      out.components.emplace_back();
      out.failures.push_back({candidates[i].lambda, e.what()});
    }
  }
  if (out.failures.size() == candidates.size()) {
    throw ConditioningError("hierarchical_posterior: every candidate failed");
  }
  out.weights = normalize_log_weights(log_w);
  return out;
}

}  // namespace asvb
