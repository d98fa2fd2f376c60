#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "asvb/errors.hpp"
#include "asvb/inducing.hpp"
#include "asvb/meanfield.hpp"
#include "asvb/nelder_mead.hpp"

namespace asvb {

enum class GridFamily { Poly, Exp, Dim, KernelContinuous };

/// Finite hyperparameter set with hyper-prior masses and feature counts.
struct HyperGrid {
  GridFamily family = GridFamily::Poly;
  std::vector<double> values;  // sorted ascending, distinct
  std::vector<double> masses;  // pi(lambda), sums to one
  std::function<Eigen::Index(double)> m_rule;

  std::size_t size() const { return values.size(); }
  Eigen::Index m(std::size_t i) const { return m_rule(values[i]); }
  double log_mass(std::size_t i) const { return std::log(masses[i]); }
  /// Throws ValidationError if any invariant is broken.
  void validate() const;
};

/// Smallest integer >= v, insensitive to rounding noise just above an
/// integer.
Eigen::Index ceil_count(double v);

/// {beta_minus + k / log n} within [beta_minus, beta_plus], uniform masses,
/// m(alpha) = ceil(c_m n^{d / (d + 2 alpha)}).
HyperGrid poly_grid(double beta_minus, double beta_plus, std::int64_t n,
                    double c_m = 1.0, int d = 1);

/// {e^{-j} : j = 1..floor(log n / (d + 2 beta_minus))}, uniform masses,
/// m(tau) = ceil(tau^{-d} (log n)^{d+1}).
HyperGrid exp_grid(double beta_minus, int d, std::int64_t n, double c_m = 1.0);

/// {1, ..., floor(sqrt n)} (or its powers of two), uniform masses, m(D) = D.
HyperGrid dim_grid(std::int64_t n, bool coarsen = false);

/// What a per-lambda fitter returns.
template <class Fit>
struct FitOutcome {
  Fit fit;
  double elbo_lambda = 0.0;
  Eigen::Index m = 0;
  double sigma_sq = 0.0;
  Eigen::Index features = 0;  // basis functions used; 0 means m
};

template <class Fit>
using Fitter = std::function<FitOutcome<Fit>(double lambda, Eigen::Index m)>;

struct SelectionRow {
  double lambda = 0.0;
  double elbo_lambda = -std::numeric_limits<double>::infinity();
  double log_mass = 0.0;
  double elbo = -std::numeric_limits<double>::infinity();
  Eigen::Index m = 0;
  Eigen::Index features = 0;
  double sigma_sq = 0.0;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

template <class Fit>
struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::size_t chosen = 0;
  Fit selected;

  const SelectionRow &chosen_row() const { return rows[chosen]; }
  double chosen_lambda() const { return rows[chosen].lambda; }
};

/// ELBO(lambda) = ELBO_lambda + log pi(lambda) for every grid value; picks
/// the maximizer (first on ties). Fits that throw a numerical error are
/// recorded and excluded.
template <class Fit>
SelectionReport<Fit> select_discrete(const HyperGrid &grid,
                                     const Fitter<Fit> &fitter) {
  grid.validate();
  SelectionReport<Fit> report;
  std::optional<Fit> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    SelectionRow row;
    row.lambda = grid.values[i];
    row.log_mass = grid.log_mass(i);
    row.m = grid.m(i);
    const auto start = std::chrono::steady_clock::now();
    try {
      FitOutcome<Fit> out = fitter(row.lambda, row.m);
      row.elbo_lambda = out.elbo_lambda;
      row.elbo = out.elbo_lambda + row.log_mass;
      row.m = out.m;
      row.features = out.features > 0 ? out.features : out.m;
      row.sigma_sq = out.sigma_sq;
      row.ok = std::isfinite(row.elbo);
      if (!row.ok) {
        row.error = "non-finite ELBO";
      } else if (!best || row.elbo > report.rows[report.chosen].elbo) {
        report.chosen = i;
        best = std::move(out.fit);
      }
    } catch (const ConditioningError &e) {
      row.error = e.what();
    } catch (const DomainError &e) {
      row.error = e.what();
    }
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    report.rows.push_back(std::move(row));
  }
  if (!best) {
    throw ConditioningError("select_discrete: every fit failed");
  }
  report.selected = std::move(*best);
  return report;
}

/// Inducing-variable fit of the series prior at one grid value. With
/// `estimate_sigma` the noise variance is tuned by maximizing the collapsed
/// bound over log sigma^2, starting from data.sigma_sq.
struct SeriesInducingFitter {
  GridFamily family;  // Poly (lambda = alpha) or Exp (lambda = tau)
  FeatureFlavor flavor = FeatureFlavor::Population;
  bool estimate_sigma = false;
  Indexing indexing = Indexing::Sequential;

  FitOutcome<VariationalGP> operator()(const Dataset &data, double lambda,
                                       Eigen::Index m) const;
};

/// Maximizes the collapsed bound over log sigma^2 for a fixed model.
double estimate_sigma_sq(const InducingModel &model, const Dataset &data,
                         double start);

/// Mean-field fit for the truncated prior with D = lambda. A precomputed
/// design with at least D columns may be shared across grid values.
struct MeanFieldFitter {
  bool estimate_sigma = false;
  const DesignMatrix *full_design = nullptr;

  FitOutcome<MeanFieldFit> operator()(const Dataset &data, double lambda,
                                      Eigen::Index m) const;
};

SeriesPrior prior_for(GridFamily family, double lambda,
                      Indexing indexing = Indexing::Sequential);

/// Squared-exponential hyperparameters with the noise standard deviation.
struct SeParams {
  double sigma = 1.0;
  double nu = 1.0;
  double tau = 1.0;

  std::array<double, 3> as_array() const { return {sigma, nu, tau}; }
  static SeParams from_array(const std::array<double, 3> &a) {
    return {a[0], a[1], a[2]};
  }
};

struct ContinuousOptions {
  std::array<bool, 3> free{true, true, true};  // (sigma, nu, tau)
  NelderMeadOptions nelder_mead{};
};

struct ContinuousReport {
  SeParams chosen;
  double objective = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  int failed_evaluations = 0;
  bool converged = false;
  bool boundary_pinned = false;
  std::vector<std::string> warnings;
};

struct ContinuousVbReport {
  ContinuousReport report;
  VariationalGP fit;
};

/// Nelder-Mead on log (sigma, nu, tau) of the collapsed bound for the
/// squared-exponential kernel. Sample features are recomputed for every
/// new tau (nu only rescales the eigenvalues).
ContinuousVbReport tune_continuous(const Dataset &data, FeatureFlavor flavor,
                                   Eigen::Index m, const SeParams &init,
                                   const SeParams &lower, const SeParams &upper,
                                   const ContinuousOptions &opts = {});

/// Same search on the exact log evidence (empirical Bayes).
ContinuousReport tune_mmle(const Dataset &data, const SeParams &init,
                           const SeParams &lower, const SeParams &upper,
                           const ContinuousOptions &opts = {});

}  // namespace asvb
