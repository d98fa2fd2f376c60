#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asvb/basis.hpp"
#include "asvb/errors.hpp"
#include "oracles.hpp"

using namespace asvb;

TEST_CASE("basis values at hand-checkable points") {
  const FourierBasis b;
  CHECK(b.eval(1, 2.0) == 1.0);
  CHECK(std::abs(b.eval(2, std::numbers::pi / 2)) < 1e-15);
  CHECK(b.eval(3, std::numbers::pi / 2) == doctest::Approx(std::numbers::sqrt2));
  CHECK_THROWS_AS(b.eval(0, 1.0), DomainError);
  CHECK_THROWS_AS(b.eval(2, -0.1), DomainError);
  CHECK_THROWS_AS(b.eval(2, 7.0), DomainError);
  CHECK_NOTHROW(b.eval(2, kTwoPi));
  CHECK_THROWS_AS(FourierBasis(2), DomainError);
}

TEST_CASE("phi_3 has unit norm under midpoint quadrature") {
  const double v = oracle::uniform_average(
      [](double x) { return std::pow(fourier_phi(3, x), 2); }, 100000);
  CHECK(std::abs(v - 1.0) < 1e-6);
}

TEST_CASE("Gram matrix of the first 64 functions is the identity") {
  const long nodes = 100000;
  std::vector<double> x(nodes);
  for (long i = 0; i < nodes; ++i) {
    x[i] = (static_cast<double>(i) + 0.5) * kTwoPi / static_cast<double>(nodes);
  }
  const MatrixXd phi = FourierBasis().design(x, 64);
  const MatrixXd g = phi.transpose() * phi / static_cast<double>(nodes);
  CHECK((g - MatrixXd::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(phi.cwiseAbs().maxCoeff() <= std::numbers::sqrt2 + 1e-12);
}

TEST_CASE("rows from the rotation recurrence match direct evaluation") {
  const FourierBasis b;
  for (double x : {0.0, 0.37, 1.0, 3.14159, 5.9, kTwoPi}) {
    const VectorXd r = b.row(x, 2001);
    double err = 0.0;
    for (long j = 1; j <= 2001; ++j) {
      err = std::max(err, std::abs(r(j - 1) - oracle::phi(j, x)));
    }
    CHECK(err < 1e-11);
  }
}

TEST_CASE("spectra") {
  CHECK(spectrum(SeriesPrior::poly(1.0), 1) == 1.0);
  CHECK(spectrum(SeriesPrior::poly(1.0), 4) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(spectrum(SeriesPrior::exp(1.0), 1) ==
        doctest::Approx(0.60653065971263342).epsilon(1e-14));
  CHECK(spectrum(SeriesPrior::truncated(4), 5) == 0.0);
  CHECK(spectrum(SeriesPrior::truncated(4), 4) == 0.5);
  CHECK_THROWS_AS(SeriesPrior::poly(0.0), DomainError);
  CHECK_THROWS_AS(SeriesPrior::exp(1.5), DomainError);
  CHECK_THROWS_AS(SeriesPrior::truncated(0), DomainError);
  CHECK_THROWS_AS(spectrum(SeriesPrior::poly(1.0), 0), DomainError);
  CHECK(SeriesPrior::truncated(7).support().value() == 7);
  CHECK_FALSE(SeriesPrior::poly(1.0).support().has_value());
}

TEST_CASE("spectra are non-increasing up to 1e4") {
  for (const SeriesPrior &p :
       {SeriesPrior::poly(0.5), SeriesPrior::poly(2.0), SeriesPrior::exp(0.1),
        SeriesPrior::exp(1.0), SeriesPrior::truncated(50),
        SeriesPrior::poly(1.0, 1, Indexing::Frequency),
        SeriesPrior::exp(0.3, 1, Indexing::Frequency)}) {
    bool ok = true;
    for (std::int64_t j = 1; j < 10000; ++j) {
      ok = ok && p.spectrum(j) >= p.spectrum(j + 1);
    }
    CHECK(ok);
  }
}

TEST_CASE("frequency indexing pairs cosine and sine") {
  const auto p = SeriesPrior::poly(1.0, 1, Indexing::Frequency);
  CHECK(p.spectrum(1) == 1.0);
  CHECK(p.spectrum(2) == 1.0);
  CHECK(p.spectrum(3) == 1.0);
  CHECK(p.spectrum(4) == doctest::Approx(std::pow(2.0, -1.5)));
  CHECK(p.spectrum(5) == p.spectrum(4));
  CHECK(p.basis_count(20) == 41);
  CHECK(SeriesPrior::poly(1.0).basis_count(20) == 20);
  CHECK(SeriesPrior(Truncated{9}, 1, Indexing::Frequency).basis_count(9) == 9);
}

TEST_CASE("Sobolev norms") {
  const std::vector<double> zeros(50, 0.0);
  CHECK(sobolev_norm_sq(zeros, 1.0, 50) == 0.0);
  CHECK_THROWS_AS(sobolev_norm_sq(zeros, -1.0, 50), DomainError);

  const std::vector<double> c{1.0, 0.5, 0.25};
  CHECK(sobolev_norm_sq(c, 1.0, 3) == doctest::Approx(1.0 + 4 * 0.25 + 9 * 0.0625));
  CHECK(sobolev_norm_sq(c, 1.0, 2) == doctest::Approx(2.0));
}

TEST_CASE("Sobolev partial sums of the example signal near smoothness 0.6") {
  const SignalSpec f0 = example_signal(1000000);
  // Direct sums over j = 3i + 1.
  auto direct = [](double beta, long J) {
    double s = 0.0;
    for (long j = 1; j <= J; j += 3) {
      s += std::pow(static_cast<double>(j), 2 * beta - 2.2);
    }
    return s;
  };
  for (double beta : {0.59, 0.61}) {
    double prev = -1.0;
    std::vector<double> sums;
    for (long J : {1000L, 10000L, 100000L, 1000000L}) {
      const double s = sobolev_norm_sq(f0.coefficients, beta, J);
      CHECK(s == doctest::Approx(direct(beta, J)).epsilon(1e-10));
      CHECK(s >= prev);
      prev = s;
      sums.push_back(s);
    }
    // Decade increments behave like 10^{2 beta - 1.2}: shrinking below
    // smoothness 0.6, growing above.
    const double r = (sums[3] - sums[2]) / (sums[2] - sums[1]);
    CHECK(r == doctest::Approx(std::pow(10.0, 2 * beta - 1.2)).epsilon(0.01));
    if (beta < 0.6) {
      CHECK(r < 1.0);
    } else {
      CHECK(r > 1.0);
    }
  }
}

TEST_CASE("example signal coefficients") {
  const SignalSpec f0 = example_signal();
  CHECK(f0.truncation() == 10000);
  CHECK(f0.shifted);
  CHECK(f0.coefficients[0] == 1.0);
  CHECK(f0.coefficients[1] == 0.0);
  CHECK(f0.coefficients[2] == 0.0);
  CHECK(f0.coefficients[3] == doctest::Approx(std::pow(4.0, -1.1)));
  CHECK(f0.coefficients[6] == doctest::Approx(std::pow(7.0, -1.1)));
}

TEST_CASE("signal evaluation") {
  SignalSpec five;
  five.coefficients = {5.0};
  for (double x : {0.0, 1.0, 4.0}) {
    CHECK(synth_signal(five, x) == 5.0);
  }

  const SignalSpec f0 = example_signal(1000);
  for (double x : {0.0, 0.5, 2.0, std::numbers::pi, 6.0}) {
    double ref = 0.0;
    for (long j = 1; j <= 1000; j += 3) {
      ref += std::pow(static_cast<double>(j), -1.1) *
             oracle::phi(j, x - std::numbers::pi);
    }
    CHECK(synth_signal(f0, x) == doctest::Approx(ref).epsilon(1e-11));
  }

  // L2(G) distance between truncations equals the coefficient tail norm.
  const SignalSpec f_hi = example_signal(10000);
  const double l2 = std::sqrt(oracle::uniform_average(
      [&](double x) {
        const double d = synth_signal(f0, x) - synth_signal(f_hi, x);
        return d * d;
      },
      40000));
  double tail = 0.0;
  for (long j = 1001; j <= 10000; ++j) {
    tail += std::pow(f_hi.coefficients[j - 1], 2);
  }
  CHECK(l2 == doctest::Approx(std::sqrt(tail)).epsilon(1e-6));
}

TEST_CASE("prior draws") {
  const VectorXd a = sample_prior(SeriesPrior::truncated(3), 5, 11);
  CHECK(a(3) == 0.0);
  CHECK(a(4) == 0.0);
  CHECK(a(0) != 0.0);
  const VectorXd b = sample_prior(SeriesPrior::poly(1.0), 40, 99);
  CHECK(b == sample_prior(SeriesPrior::poly(1.0), 40, 99));
  CHECK_THROWS_AS(sample_prior(SeriesPrior::poly(1.0), 0, 1), DomainError);

  const auto prior = SeriesPrior::poly(1.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    const double v = sample_prior(prior, 2, static_cast<std::uint64_t>(s) + 1)(1);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / draws;
  const double var = sum_sq / draws - mean * mean;
  CHECK(var == doctest::Approx(prior.variance(2)).epsilon(0.05));
}

TEST_CASE("empirical Gram matrix concentrates") {
  int good = 0;
  for (int seed = 1; seed <= 50; ++seed) {
    std::mt19937_64 rng(seed);
    const auto x = oracle::uniform_points(5000, rng);
    const MatrixXd phi = FourierBasis().design(x, 20);
    const MatrixXd g = phi.transpose() * phi / 5000.0;
    good += (g - MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 0.1 ? 1 : 0;
  }
  CHECK(good >= 48);
}
