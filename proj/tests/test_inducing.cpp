#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asvb/errors.hpp"
#include "asvb/inducing.hpp"
#include "oracles.hpp"

using namespace asvb;

namespace {

Dataset noisy(const std::vector<double> &x, const VectorXd &f, double s2,
              std::mt19937_64 &rng) {
  Dataset d;
  d.x = x;
  d.y = f + std::sqrt(s2) * oracle::normals(static_cast<long>(x.size()), rng);
  d.sigma_sq = s2;
  return d;
}

Dataset se_data(long n, std::uint64_t seed, double s2) {
  std::mt19937_64 rng(seed);
  const auto x = oracle::uniform_points(n, rng);
  return noisy(x, oracle::normals(n, rng), s2, rng);
}

double min_eig(const MatrixXd &a) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(a, Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace

TEST_CASE("population features without a prior tail reproduce the kernel") {
  std::mt19937_64 rng(3);
  const auto x = oracle::uniform_points(30, rng);
  const auto prior = SeriesPrior::truncated(7);
  const InducingModel m = population_features(prior, x, 7);
  const MatrixXd k = kernel_matrix(SeriesKernel{prior, 7}, x);
  CHECK((m.nystrom() - k).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((m.kff_diag - k.diagonal()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(population_features(prior, x, 8), DomainError);
  CHECK_THROWS_AS(population_features(prior, x, 0), DomainError);
}

TEST_CASE("one population feature") {
  const std::vector<double> x{0.3, 1.0, 5.5};
  const auto prior = SeriesPrior::poly(1.0);
  const InducingModel m = population_features(prior, x, 1);
  CHECK(m.flavor == FeatureFlavor::Population);
  CHECK(m.kuu.rows() == 1);
  CHECK(m.kuu(0, 0) == prior.variance(1));
  CHECK(m.kuf.isApproxToConstant(prior.variance(1)));
  CHECK(default_population_truncation(5) == 1000);
  CHECK(default_population_truncation(300) == 3000);
}

TEST_CASE("Nystrom residual trace is the prior tail") {
  std::mt19937_64 rng(8);
  const auto x = oracle::uniform_points(40, rng);
  const auto prior = SeriesPrior::poly(0.8);
  const long J = 300;
  const InducingModel m = population_features(prior, x, 12, J);
  const MatrixXd k = kernel_matrix(SeriesKernel{prior, J}, x);
  const double resid = (k - m.nystrom()).trace();
  double tail = 0.0;
  for (double xi : x) {
    for (long j = 13; j <= J; ++j) tail += prior.variance(j) * std::pow(oracle::phi(j, xi), 2);
  }
  CHECK(resid == doctest::Approx(tail).epsilon(1e-9));
  CHECK(resid >= 0.0);
}

TEST_CASE("sample features from hand-checkable matrices") {
  const InducingModel id = sample_features(MatrixXd::Identity(6, 6), 4);
  CHECK(id.eigvals.isApproxToConstant(1.0));
  CHECK((id.nystrom() - id.vectors * id.vectors.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(id.kff_diag.sum() - id.nystrom().trace() == doctest::Approx(2.0));

  MatrixXd k(2, 2);
  k << 2, 1, 1, 2;
  const InducingModel s = sample_features(k, 1);
  CHECK(s.eigvals(0) == doctest::Approx(3.0));
  CHECK(std::abs(s.vectors(0, 0)) == doctest::Approx(1 / std::numbers::sqrt2));
  CHECK(s.vectors(0, 0) == doctest::Approx(s.vectors(1, 0)));
  CHECK(s.kuu(0, 0) == doctest::Approx(3.0));

  MatrixXd ns = k;
  ns(0, 1) = 0.5;
  CHECK_THROWS_AS(sample_features(ns, 1), DomainError);
  CHECK_THROWS_AS(sample_features(k, 3), DomainError);
}

TEST_CASE("full-rank sample features reconstruct the kernel") {
  std::mt19937_64 rng(21);
  const MatrixXd k = oracle::random_psd(40, 60, rng);
  const InducingModel m = sample_features(k, 40);
  CHECK((m.nystrom() - k).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((m.vectors.transpose() * m.vectors - MatrixXd::Identity(40, 40))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  for (long j = 1; j < 40; ++j) CHECK(m.eigvals(j) <= m.eigvals(j - 1));
  CHECK((m.kuf - m.eigvals.asDiagonal() * m.vectors.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank-deficient kernels drop null directions") {
  std::mt19937_64 rng(2);
  const MatrixXd k = oracle::random_psd(20, 5, rng);
  const InducingModel m = sample_features(k, 10);
  CHECK(m.m() == 5);
  CHECK_FALSE(m.warnings.empty());
}

TEST_CASE("collapsed bound against the dense formula") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const long n = 25 + rep;
    const auto x = oracle::uniform_points(n, rng);
    const double s2 = 0.05 + 0.1 * rep;
    const Dataset d = noisy(x, oracle::normals(n, rng), s2, rng);

    const auto prior = SeriesPrior::poly(0.7 + 0.1 * rep);
    const InducingModel pm = population_features(prior, x, 3 + rep, 200);
    const MatrixXd kp = kernel_matrix(SeriesKernel{prior, 200}, x);
    const MatrixXd qp = oracle::nystrom(pm.kuf.transpose(), pm.kuu);
    CHECK(elbo_lambda(pm, d) ==
          doctest::Approx(oracle::collapsed_bound(kp, qp, d.y, s2)).epsilon(1e-10));

    const KernelSpec se = SquaredExponential{1.5, 0.4 + 0.1 * rep};
    const InducingModel sm = sample_features(se, x, 5 + rep);
    const MatrixXd ks = kernel_matrix(se, x);
    const MatrixXd qs = oracle::nystrom(sm.kuf.transpose(), sm.kuu);
    CHECK(elbo_lambda(sm, d) ==
          doctest::Approx(oracle::collapsed_bound(ks, qs, d.y, s2)).epsilon(1e-10));
  }
}

TEST_CASE("one observation, one population feature") {
  const auto prior = SeriesPrior::poly(1.0);
  const double x = 2.2;
  const double y = 0.7;
  const double s2 = 0.4;
  const long J = 1000;
  const InducingModel m = population_features(prior, std::vector<double>{x}, 1, J);
  double k = 0.0;
  for (long j = 1; j <= J; ++j) k += prior.variance(j) * std::pow(oracle::phi(j, x), 2);
  const double s1 = prior.variance(1);
  const double q = s1 * s1 / s1;
  const double ref = -0.5 * std::log(2 * std::numbers::pi * (q + s2)) -
                     y * y / (2 * (q + s2)) - (k - q) / (2 * s2);
  CHECK(elbo_lambda(m, Dataset{{x}, VectorXd::Constant(1, y), s2}) ==
        doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("full-rank sample features recover the exact posterior") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Dataset d = se_data(40 + 2 * static_cast<long>(seed), seed, 0.3);
    const KernelSpec se = SquaredExponential{1.0 + 0.2 * seed, 1.5};
    const InducingModel m = sample_features(se, d.x, d.size());
    CHECK(elbo_lambda(m, d) == doctest::Approx(log_evidence(se, d)).epsilon(1e-10));
    const VariationalGP q = titsias_fit(m, d);
    const auto vb = predict(q, d.x);
    const auto ex = exact_posterior(se, d, d.x);
    CHECK(oracle::rel_l2(vb.mean, ex.mean) < 1e-6);
    CHECK((vb.cov.diagonal() - ex.cov.diagonal()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(kl_to_posterior(q, d, se) == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("optimal fit limits") {
  std::mt19937_64 rng(9);
  const auto x = oracle::uniform_points(30, rng);
  const InducingModel m = population_features(SeriesPrior::poly(1.0), x, 6);
  Dataset zero{x, VectorXd::Zero(30), 0.2};
  CHECK(titsias_fit(m, zero).mu.cwiseAbs().maxCoeff() == 0.0);

  Dataset vague{x, oracle::normals(30, rng), 1e12};
  const VariationalGP q = titsias_fit(m, vague);
  CHECK(((q.sigma - m.kuu).norm() / m.kuu.norm()) < 1e-4);
}

TEST_CASE("prediction formulas") {
  std::mt19937_64 rng(4);
  const auto x = oracle::uniform_points(20, rng);
  const KernelSpec se = SquaredExponential{1.2, 0.9};
  const InducingModel m = sample_features(se, x, 8);
  const std::vector<double> query{0.1, 2.0, 2.5, 6.0};

  VariationalGP prior_q{m, VectorXd::Zero(m.m()), m.kuu, 0.3};
  const auto p = predict(prior_q, query);
  CHECK((p.cov - kernel_matrix(se, query)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);

  const Dataset d = noisy(x, oracle::normals(20, rng), 0.3, rng);
  VariationalGP q = titsias_fit(m, d);
  const VectorXd base = predict(q, query).mean;
  q.mu *= 2.5;
  CHECK((predict(q, query).mean - 2.5 * base).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((predict_mean(q, query) - predict(q, query).mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(predict(q, std::vector<double>{}), ValidationError);

  // Population means are carried as basis coefficients.
  const InducingModel pm = population_features(SeriesPrior::poly(1.0), x, 9);
  const VariationalGP pq = titsias_fit(pm, d);
  const auto pp = predict(pq, query);
  REQUIRE(pp.mean_coefficients.has_value());
  CHECK((oracle::design(query, 9) * *pp.mean_coefficients - pp.mean).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("variational predictive variance never exceeds the prior") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const auto x = oracle::uniform_points(30, rng);
    const KernelSpec se = SquaredExponential{0.5 + rep, 0.3 + 0.1 * rep};
    const InducingModel m = sample_features(se, x, 10);
    const Dataset d = noisy(x, oracle::normals(30, rng), 0.1 + 0.05 * rep, rng);
    const VariationalGP q = titsias_fit(m, d);
    const auto query = oracle::uniform_points(50, rng);
    const auto p = predict(q, query);
    CHECK((p.cov.diagonal() - kernel_diag(se, query)).maxCoeff() <= 1e-8);
  }
}

TEST_CASE("gap between evidence and bound is the KL") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    const long n = 10 + rep % 30;
    const auto x = oracle::uniform_points(n, rng);
    const double s2 = 0.05 + 0.02 * (rep % 10);
    const Dataset d = noisy(x, oracle::normals(n, rng), s2, rng);
    const auto prior = SeriesPrior::poly(0.6 + 0.05 * (rep % 7));
    const long J = 40;
    const KernelSpec kern = SeriesKernel{prior, J};
    const double ev = log_evidence(kern, d);

    const long m = 2 + rep % 8;
    const InducingModel pm = population_features(prior, x, m, J);
    const VariationalGP fit = titsias_fit(pm, d);
    const double kl = kl_to_posterior(fit, d, kern);
    CHECK(ev - elbo_lambda(pm, d) == doctest::Approx(kl).epsilon(1e-8).scale(1.0));
    CHECK(kl >= -1e-9);

    const MatrixXd phi = oracle::design(x, J);
    MatrixXd h = MatrixXd::Zero(m, J);
    h.leftCols(m).setIdentity();
    const VectorXd pv = prior.variances(J);
    const double kl_ref = oracle::coefficient_kl(pv, phi, d.y, s2, h, fit.mu, fit.sigma);
    CHECK(kl == doctest::Approx(kl_ref).epsilon(1e-8).scale(1.0));

    // Away from the optimum too.
    VariationalGP off = fit;
    off.mu += oracle::normals(m, rng) * 0.1;
    off.sigma = oracle::random_psd(m, m + 3, rng) * 0.01;
    CHECK(ev - elbo_at(off, d) ==
          doctest::Approx(oracle::coefficient_kl(pv, phi, d.y, s2, h, off.mu, off.sigma))
              .epsilon(1e-8)
              .scale(1.0));

    const InducingModel sm = sample_features(kern, x, std::min<long>(m + 2, n));
    const VariationalGP sf = titsias_fit(sm, d);
    const MatrixXd hs = sm.vectors.transpose() * phi;
    CHECK(ev - elbo_lambda(sm, d) ==
          doctest::Approx(oracle::coefficient_kl(pv, phi, d.y, s2, hs, sf.mu, sf.sigma))
              .epsilon(1e-8)
              .scale(1.0));
    CHECK(elbo_lambda(sm, d) <= ev + 1e-9);
    CHECK(elbo_at(sf, d) == doctest::Approx(elbo_lambda(sm, d)).epsilon(1e-10));
  }
}

TEST_CASE("moving off the optimum raises the KL") {
  const Dataset d = se_data(30, 6, 0.2);
  const KernelSpec se = SquaredExponential{1.0, 1.0};
  const VariationalGP q = titsias_fit(sample_features(se, d.x, 10), d);
  VariationalGP p = q;
  p.mu.array() += 1.0;
  CHECK(kl_to_posterior(p, d, se) > kl_to_posterior(q, d, se));
}

TEST_CASE("nested sample features: bound rises and KL falls with m") {
  const Dataset d = se_data(60, 13, 0.1);
  const KernelSpec se = SquaredExponential{2.0, 0.6};
  double prev_elbo = -std::numeric_limits<double>::infinity();
  double prev_kl = std::numeric_limits<double>::infinity();
  for (long m = 1; m <= 60; m += 3) {
    const InducingModel model = sample_features(se, d.x, m);
    const double e = elbo_lambda(model, d);
    const double kl = kl_to_posterior(titsias_fit(model, d), d, se);
    CHECK(e >= prev_elbo - 1e-9);
    CHECK(kl <= prev_kl + 1e-8);
    prev_elbo = e;
    prev_kl = kl;
  }
}

TEST_CASE("Nystrom residual is PSD") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const long n = 20 + 9 * rep;
    const auto x = oracle::uniform_points(n, rng);
    const auto prior = SeriesPrior::poly(0.5 + 0.1 * rep);
    const InducingModel pm = population_features(prior, x, 1 + rep, 500);
    const MatrixXd kp = kernel_matrix(SeriesKernel{prior, 500}, x);
    CHECK(min_eig(kp - pm.nystrom()) >= -1e-6 * kp.trace());

    const KernelSpec se = SquaredExponential{1.0, 0.2 + 0.05 * rep};
    const MatrixXd ks = kernel_matrix(se, x);
    const InducingModel sm = sample_features(ks, 1 + rep);
    CHECK(min_eig(ks - sm.nystrom()) >= -1e-6 * ks.trace());
  }
}

TEST_CASE("oracle-scale guard") {
  const Dataset d = se_data(501, 1, 0.1);
  const KernelSpec se = SquaredExponential{1.0, 1.0};
  const VariationalGP q = titsias_fit(sample_features(se, d.x, 5), d);
  CHECK_THROWS_AS(kl_to_posterior(q, d, se), ValidationError);
}
