#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asvb/selection.hpp"

namespace asvb {

enum class PriorFamily { Poly, Exp, Dim };

PriorFamily parse_prior_family(const std::string &s);
std::string to_string(PriorFamily f);
FeatureFlavor parse_flavor(const std::string &s);
std::string to_string(FeatureFlavor f);
Indexing parse_indexing(const std::string &s);
std::string to_string(Indexing i);

/// Everything a run needs. Parsed from a flat `key = value` file plus
/// command-line overrides.
struct ExperimentConfig {
  std::string experiment = "select";  // select | fit | running
  std::int64_t n = 10000;
  std::optional<std::uint64_t> seed;
  PriorFamily prior = PriorFamily::Poly;
  FeatureFlavor features = FeatureFlavor::Population;
  Indexing indexing = Indexing::Frequency;  // poly and exp spectra
  double c_m = 1.0;
  std::optional<Eigen::Index> m;           // overrides the m-rule
  std::optional<double> sigma_sq;          // nullopt = estimate
  double true_sigma_sq = 0.01;             // noise level for simulated data
  double beta_minus = 0.5;
  double beta_plus = 2.0;
  bool coarsen = false;                    // powers-of-two D grid
  std::optional<double> lambda;            // fixed hyperparameter for `fit`
  std::string signal = "example";          // example | sobolev
  double signal_beta = 1.0;
  Eigen::Index query_size = 512;
  std::string data_path;                   // running data CSV
  std::filesystem::path out_dir = "out";

  /// Applies `key = value` pairs in order; unknown keys are an error.
  void apply(const std::map<std::string, std::string> &kv);
  /// Throws ValidationError on out-of-range fields.
  void validate() const;
};

/// Reads `key = value` lines ('#' starts a comment) preserving file order.
std::vector<std::pair<std::string, std::string>> read_config_pairs(
    const std::filesystem::path &path);

ExperimentConfig load_config(const std::filesystem::path &path);

struct SimulatedData {
  Dataset data;
  SignalSpec truth;
};

/// x_i ~ U(0, 2pi), y_i = f(x_i) + N(0, sigma_sq), deterministic in `seed`.
SimulatedData simulate(const SignalSpec &truth, std::int64_t n,
                       std::uint64_t seed, double sigma_sq);

/// simulate() with the polynomial-decay example signal.
SimulatedData simulate_poly(std::int64_t n, std::uint64_t seed,
                            double sigma_sq);

/// Two numeric columns (time in seconds, speed in km/h); optional header;
/// extra columns are ignored. Malformed rows raise ParseError with the line.
Dataset load_running_csv(const std::filesystem::path &path);

/// One row of the emitted ELBO table.
struct ElboRow {
  double lambda;
  double elbo_lambda;
  double log_mass;
  double elbo;
  Eigen::Index m;
  double sigma_sq;
  bool ok;
  Eigen::Index features;
};

struct RunReport {
  std::string experiment;
  std::map<std::string, double> chosen;  // hyperparameters by name
  Eigen::Index m = 0;
  Eigen::Index features = 0;  // basis functions behind m
  double sigma_sq = 0.0;
  std::vector<double> query;
  VectorXd mean;
  VectorXd lower;
  VectorXd upper;
  std::optional<VectorXd> truth;
  std::optional<double> l2_error;
  std::optional<double> coverage;
  double seconds = 0.0;
  std::vector<ElboRow> elbo_table;
  std::vector<std::string> warnings;
};

/// Number of midpoint nodes used for L2(G) errors.
inline constexpr Eigen::Index kQuadratureNodes = 10000;

std::vector<double> linspace(double a, double b, Eigen::Index count);
/// Midpoint nodes of [0, 2pi].
std::vector<double> quadrature_nodes(Eigen::Index count = kQuadratureNodes);

/// Pointwise fraction of query points where lower <= truth <= upper.
double band_coverage(const VectorXd &truth, const VectorXd &lower,
                     const VectorXd &upper);

RunReport run_experiment(const ExperimentConfig &config);

struct ContractionReport {
  std::vector<std::int64_t> n_list;
  std::vector<std::vector<double>> errors;  // [n index][replicate]
  std::vector<double> mean_errors;
  double slope = 0.0;
  double slope_se = 0.0;
  double target_slope = 0.0;
};

/// Least-squares slope of log error on log n over all replicate points,
/// with its standard error.
std::pair<double, double> log_log_slope(const std::vector<std::int64_t> &n_list,
                                        const std::vector<std::vector<double>> &errors);

struct ContractionSettings {
  PriorFamily family = PriorFamily::Dim;
  double beta_true = 1.0;
  std::vector<std::int64_t> n_list{500, 2000, 8000};
  int replicates = 10;
  std::uint64_t seed = 1;
  double sigma_sq = 1.0;
  double beta_minus = 0.5;
  double beta_plus = 2.0;
  Indexing indexing = Indexing::Frequency;
};

/// Adaptive fits on c_j = j^{-1/2-beta} data for each n; L2 errors of the
/// variational posterior mean and the fitted rate.
ContractionReport contraction_study(const ContractionSettings &s);

enum class ReportFormat { Csv, Svg };

/// Writes band.csv / elbo.csv (Csv) or band.svg (Svg) into `dir`; returns
/// the written paths. Output is byte-deterministic.
std::vector<std::filesystem::path> emit_report(const RunReport &report,
                                               ReportFormat format,
                                               const std::filesystem::path &dir);

/// Band table as CSV text (`x,mean,lo95,hi95,truth`).
std::string band_csv(const RunReport &report);
std::string elbo_csv(const RunReport &report);
std::string summary_csv(const RunReport &report);
std::string band_svg(const RunReport &report);

/// Reads a band table back (for the `report` subcommand).
RunReport read_band_csv(const std::filesystem::path &path);

/// %.17g
std::string format_double(double v);

}  // namespace asvb
