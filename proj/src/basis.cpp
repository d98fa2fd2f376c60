#include "asvb/basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kDomainSlack = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

FourierBasis::FourierBasis(int dim) : dim_(dim) {
  if (dim != 1) {
    // Tensor-product bases are not provided; d is still carried in the
    // spectra exponents.
    throw DomainError("FourierBasis: only d = 1 is implemented");
  }
}

bool FourierBasis::contains(double x) const {
  return x >= lower() - kDomainSlack && x <= upper() + kDomainSlack;
}

double fourier_phi(std::int64_t j, double x) {
  if (j == 1) {
    return 1.0;
  }
  const auto k = static_cast<double>(j / 2);
  return j % 2 == 0 ? kSqrt2 * std::cos(k * x) : kSqrt2 * std::sin(k * x);
}

double FourierBasis::eval(std::int64_t j, double x) const {
  if (j < 1) {
    throw DomainError("basis index must be >= 1, got " + std::to_string(j));
  }
  if (!contains(x)) {
    throw DomainError("point " + std::to_string(x) + " outside [0, 2pi]");
  }
  return fourier_phi(j, x);
}

void FourierBasis::row_into(double x, Eigen::Ref<VectorXd> out) const {
  const Eigen::Index count = out.size();
  if (count == 0) {
    return;
  }
  out(0) = 1.0;
  // cos(kx) + i sin(kx) by repeated rotation, re-anchored every 64 steps.
  const double c1 = std::cos(x);
  const double s1 = std::sin(x);
  double c = 1.0;
  double s = 0.0;
  for (Eigen::Index k = 1; 2 * k - 1 < count; ++k) {
    if (k % 64 == 0) {
      c = std::cos(static_cast<double>(k) * x);
      s = std::sin(static_cast<double>(k) * x);
    } else {
      const double cn = c * c1 - s * s1;
      s = s * c1 + c * s1;
      c = cn;
    }
    out(2 * k - 1) = kSqrt2 * c;
    if (2 * k < count) {
      out(2 * k) = kSqrt2 * s;
    }
  }
}

VectorXd FourierBasis::row(double x, Eigen::Index count) const {
  VectorXd out(count);
  row_into(x, out);
  return out;
}

MatrixXd FourierBasis::design(std::span<const double> x,
                              Eigen::Index count) const {
  MatrixXd phi(static_cast<Eigen::Index>(x.size()), count);
  VectorXd buf(count);
  for (std::size_t i = 0; i < x.size(); ++i) {
    row_into(x[i], buf);
    phi.row(static_cast<Eigen::Index>(i)) = buf.transpose();
  }
  return phi;
}

SeriesPrior::SeriesPrior(Kind kind, int dim, Indexing indexing)
    : kind_(kind), dim_(dim), indexing_(indexing), basis_(dim) {
  std::visit(Overloaded{
                 [](const PolyDecay &p) {
                   if (!(p.alpha > 0.0)) {
                     throw DomainError("PolyDecay: alpha must be > 0");
                   }
                 },
                 [](const ExpDecay &e) {
                   if (!(e.tau > 0.0 && e.tau <= 1.0)) {
                     throw DomainError("ExpDecay: tau must lie in (0, 1]");
                   }
                 },
                 [](const Truncated &t) {
                   if (t.dimension < 1) {
                     throw DomainError("Truncated: dimension must be >= 1");
                   }
                 },
             },
             kind_);
}

double SeriesPrior::spectrum(std::int64_t j) const {
  if (j < 1) {
    throw DomainError("spectrum index must be >= 1");
  }
  const double d = dim_;
  const auto jj = static_cast<double>(
      indexing_ == Indexing::Frequency ? std::max<std::int64_t>(1, j / 2) : j);
  return std::visit(
      Overloaded{
          [&](const PolyDecay &p) { return std::pow(jj, -0.5 - p.alpha / d); },
          [&](const ExpDecay &e) {
            return std::sqrt(std::pow(e.tau, d) *
                             std::exp(-e.tau * std::pow(jj, 1.0 / d)));
          },
          [&](const Truncated &t) {
            return j <= t.dimension
                       ? 1.0 / std::sqrt(static_cast<double>(t.dimension))
                       : 0.0;
          },
      },
      kind_);
}

double SeriesPrior::variance(std::int64_t j) const {
  const double s = spectrum(j);
  return s * s;
}

Eigen::Index SeriesPrior::basis_count(Eigen::Index m) const {
  if (indexing_ == Indexing::Frequency && !support()) {
    return 2 * m + 1;
  }
  return m;
}

std::optional<std::int64_t> SeriesPrior::support() const {
  if (const auto *t = std::get_if<Truncated>(&kind_)) {
    return t->dimension;
  }
  return std::nullopt;
}

VectorXd SeriesPrior::variances(Eigen::Index count) const {
  VectorXd v(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    v(j) = variance(j + 1);
  }
  return v;
}

double spectrum(const SeriesPrior &prior, std::int64_t j) {
  return prior.spectrum(j);
}

double sobolev_norm_sq(std::span<const double> coeffs, double beta,
                       std::int64_t truncation, int dim) {
  if (beta < 0.0 || truncation < 1) {
    throw DomainError("sobolev_norm_sq: need beta >= 0 and J >= 1");
  }
  const auto limit =
      std::min<std::int64_t>(truncation, static_cast<std::int64_t>(coeffs.size()));
  const double expo = 2.0 * beta / dim;
  double sum = 0.0;
  for (std::int64_t j = 1; j <= limit; ++j) {
    const double c = coeffs[static_cast<std::size_t>(j - 1)];
    if (c != 0.0) {
      sum += std::pow(static_cast<double>(j), expo) * c * c;
    }
  }
  return sum;
}

SignalSpec example_signal(std::int64_t truncation) {
  SignalSpec spec;
  spec.shifted = true;
  spec.coefficients.assign(static_cast<std::size_t>(truncation), 0.0);
  for (std::int64_t j = 1; j <= truncation; j += 3) {
    spec.coefficients[static_cast<std::size_t>(j - 1)] =
        std::pow(static_cast<double>(j), -1.1);
  }
  return spec;
}

SignalSpec sobolev_signal(double beta, std::int64_t truncation) {
  SignalSpec spec;
  spec.coefficients.resize(static_cast<std::size_t>(truncation));
  for (std::int64_t j = 1; j <= truncation; ++j) {
    spec.coefficients[static_cast<std::size_t>(j - 1)] =
        std::pow(static_cast<double>(j), -0.5 - beta);
  }
  return spec;
}

double synth_signal(const SignalSpec &spec, double x) {
  const auto &c = spec.coefficients;
  if (c.empty()) {
    return 0.0;
  }
  const double arg = spec.shifted ? x - std::numbers::pi : x;
  const double c1 = std::cos(arg);
  const double s1 = std::sin(arg);
  double cs = 1.0;
  double sn = 0.0;
  double sum = c[0];
  const std::size_t count = c.size();
  for (std::size_t k = 1; 2 * k - 1 < count; ++k) {
    if (k % 64 == 0) {
      cs = std::cos(static_cast<double>(k) * arg);
      sn = std::sin(static_cast<double>(k) * arg);
    } else {
      const double cn = cs * c1 - sn * s1;
      sn = sn * c1 + cs * s1;
      cs = cn;
    }
    double term = c[2 * k - 1] * cs;
    if (2 * k < count) {
      term += c[2 * k] * sn;
    }
    sum += kSqrt2 * term;
  }
  return sum;
}

VectorXd synth_signal(const SignalSpec &spec, std::span<const double> x) {
  VectorXd out(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = synth_signal(spec, x[i]);
  }
  return out;
}

VectorXd sample_prior(const SeriesPrior &prior, std::int64_t truncation,
                      std::uint64_t seed) {
  if (truncation < 1) {
    throw DomainError("sample_prior: truncation must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  VectorXd out(truncation);
  for (std::int64_t j = 1; j <= truncation; ++j) {
    out(j - 1) = prior.spectrum(j) * normal(rng);
  }
  return out;
}

}  // namespace asvb
