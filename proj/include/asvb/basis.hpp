#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace asvb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Real Fourier basis on [0, 2pi], orthonormal for the uniform design
/// distribution: phi_1 = 1, phi_{2k} = sqrt(2) cos(kx),
/// phi_{2k+1} = sqrt(2) sin(kx). Bounded by sqrt(2).
class FourierBasis {
 public:
  explicit FourierBasis(int dim = 1);

  int dim() const { return dim_; }
  double lower() const { return 0.0; }
  double upper() const { return kTwoPi; }
  bool contains(double x) const;

  /// phi_j(x); throws DomainError for j < 1 or x outside [0, 2pi].
  double eval(std::int64_t j, double x) const;

  /// phi_1(x), ..., phi_count(x) for any real x (periodic extension).
  VectorXd row(double x, Eigen::Index count) const;
  void row_into(double x, Eigen::Ref<VectorXd> out) const;

  /// n x count matrix whose i-th row is row(x_i).
  MatrixXd design(std::span<const double> x, Eigen::Index count) const;

 private:
  int dim_;
};

/// phi_j(x) on the periodic extension, no argument checks.
double fourier_phi(std::int64_t j, double x);

struct PolyDecay {
  double alpha;
};
struct ExpDecay {
  double tau;
};
struct Truncated {
  std::int64_t dimension;
};

/// How the decaying spectra count. Sequential: s_j uses the basis index j.
/// Frequency: s_j uses the frequency max(1, floor(j/2)), so cosine and sine
/// share a variance, and a feature count m means the constant plus m
/// cosine/sine pairs (2m + 1 basis functions). Truncated priors always
/// count basis functions.
enum class Indexing { Sequential, Frequency };

/// Gaussian series prior f = sum_j s_j Z_j phi_j.
class SeriesPrior {
 public:
  using Kind = std::variant<PolyDecay, ExpDecay, Truncated>;

  explicit SeriesPrior(Kind kind, int dim = 1,
                       Indexing indexing = Indexing::Sequential);

  static SeriesPrior poly(double alpha, int dim = 1,
                          Indexing indexing = Indexing::Sequential) {
    return SeriesPrior(PolyDecay{alpha}, dim, indexing);
  }
  static SeriesPrior exp(double tau, int dim = 1,
                         Indexing indexing = Indexing::Sequential) {
    return SeriesPrior(ExpDecay{tau}, dim, indexing);
  }
  static SeriesPrior truncated(std::int64_t dimension, int dim = 1) {
    return SeriesPrior(Truncated{dimension}, dim);
  }

  const Kind &kind() const { return kind_; }
  int dim() const { return dim_; }
  const FourierBasis &basis() const { return basis_; }
  Indexing indexing() const { return indexing_; }

  /// Number of basis functions behind a feature count m.
  Eigen::Index basis_count(Eigen::Index m) const;

  /// Square-root eigenvalue s_j (j >= 1).
  double spectrum(std::int64_t j) const;
  /// s_j^2
  double variance(std::int64_t j) const;
  /// Largest index with non-zero spectrum, if finite.
  std::optional<std::int64_t> support() const;
  /// s_1^2, ..., s_count^2
  VectorXd variances(Eigen::Index count) const;

 private:
  Kind kind_;
  int dim_;
  Indexing indexing_;
  FourierBasis basis_;
};

double spectrum(const SeriesPrior &prior, std::int64_t j);

/// sum_{j <= J} j^{2 beta / d} c_j^2 where coeffs[j-1] = c_j.
double sobolev_norm_sq(std::span<const double> coeffs, double beta,
                       std::int64_t truncation, int dim = 1);

/// Truth specified by its basis coefficients, evaluated as a partial sum.
struct SignalSpec {
  std::vector<double> coefficients;  // coefficients[j-1] = <f, phi_j>
  bool shifted = false;              // evaluate at x - pi
  std::int64_t truncation() const {
    return static_cast<std::int64_t>(coefficients.size());
  }
};

inline constexpr std::int64_t kDefaultSignalTruncation = 10000;

/// f_0 = sum_{j >= 0} (3j+1)^{-1.1} phi_{3j+1}(x - pi), truncated.
SignalSpec example_signal(std::int64_t truncation = kDefaultSignalTruncation);

/// Coefficients c_j = j^{-1/2 - beta}: in every Sobolev ball of order < beta.
SignalSpec sobolev_signal(double beta,
                          std::int64_t truncation = kDefaultSignalTruncation);

/// Evaluates the truncated series at x (at x - pi when `shifted` is set).
double synth_signal(const SignalSpec &spec, double x);
VectorXd synth_signal(const SignalSpec &spec, std::span<const double> x);

/// (s_j Z_j)_{j <= J} with Z_j iid N(0,1) drawn from a std::mt19937_64
/// seeded with `seed`.
VectorXd sample_prior(const SeriesPrior &prior, std::int64_t truncation,
                      std::uint64_t seed);

}  // namespace asvb
