#include "asvb/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "asvb/errors.hpp"

namespace asvb {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(const std::string &cell) {
  const std::string t = trim(cell);
  if (t.empty()) {
    return std::nullopt;
  }
  double v = 0.0;
  const char *first = t.data();
  const char *last = t.data() + t.size();
  if (*first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

double require_number(const std::string &key, const std::string &value) {
  const auto v = parse_number(value);
  if (!v) {
    throw ValidationError("config: '" + key + "' expects a number, got '" +
                          value + "'");
  }
  return *v;
}

std::int64_t require_integer(const std::string &key, const std::string &value) {
  const double v = require_number(key, value);
  if (v != std::floor(v)) {
    throw ValidationError("config: '" + key + "' expects an integer");
  }
  return static_cast<std::int64_t>(v);
}

bool require_bool(const std::string &key, const std::string &value) {
  if (value == "true" || value == "1" || value == "yes") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no") {
    return false;
  }
  throw ValidationError("config: '" + key + "' expects a boolean");
}

double sample_variance(const VectorXd &y) {
  if (y.size() < 2) {
    return 1.0;
  }
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

// L2 error of a finite series mean against the truth, exact by
// orthonormality of the basis.
double series_l2_error(const VectorXd &coef, const SignalSpec &truth) {
  const auto &c = truth.coefficients;
  double sum = 0.0;
  const auto k = static_cast<std::size_t>(coef.size());
  for (std::size_t j = 0; j < std::max(k, c.size()); ++j) {
    const double a = j < k ? coef(static_cast<Eigen::Index>(j)) : 0.0;
    const double b = j < c.size() ? c[j] : 0.0;
    sum += (a - b) * (a - b);
  }
  return std::sqrt(sum);
}

std::uint64_t replicate_seed(std::uint64_t base, std::size_t n_index,
                             int replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(n_index),
                    static_cast<std::uint32_t>(replicate)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

template <class Fit>
void copy_rows(const SelectionReport<Fit> &sel, RunReport *report) {
  for (const SelectionRow &r : sel.rows) {
    report->elbo_table.push_back(
        {r.lambda, r.elbo_lambda, r.log_mass, r.elbo, r.m, r.sigma_sq, r.ok,
         r.features});
    if (!r.ok) {
      report->warnings.push_back("lambda = " + format_double(r.lambda) +
                                 " excluded: " + r.error);
    }
  }
}

void fill_band(const GaussianPosterior &post, RunReport *report) {
  report->query = post.query;
  report->mean = post.mean;
  report->lower = post.lower95();
  report->upper = post.upper95();
}

struct SeriesSelection {
  GaussianPosterior band;
  VectorXd coefficients;  // mean as a basis series
  double sigma_sq;
  Eigen::Index m;
  double lambda;
  Eigen::Index features = 0;
};

// Shared by run_experiment and contraction_study.
SeriesSelection select_series(PriorFamily family, const Dataset &data,
                              const HyperGrid &grid, FeatureFlavor flavor,
                              Indexing indexing, bool estimate_sigma,
                              std::span<const double> query,
                              RunReport *report) {
  if (family == PriorFamily::Dim) {
    const DesignMatrix full = design_matrix(
        FourierBasis(), data.x,
        static_cast<Eigen::Index>(std::llround(grid.values.back())));
    MeanFieldFitter fitter{estimate_sigma, &full};
    const Fitter<MeanFieldFit> f = [&](double lambda, Eigen::Index m) {
      return fitter(data, lambda, m);
    };
    const auto sel = select_discrete(grid, f);
    if (report != nullptr) {
      copy_rows(sel, report);
      if (!sel.selected.converged) {
        report->warnings.push_back("mean-field fit hit the sweep cap");
      }
    }
    const SelectionRow &row = sel.chosen_row();
    SeriesSelection out{mf_predict(sel.selected.q, query), sel.selected.q.mu,
                        row.sigma_sq, row.m, row.lambda};
    return out;
  }
  const SeriesInducingFitter fitter{
      family == PriorFamily::Poly ? GridFamily::Poly : GridFamily::Exp, flavor,
      estimate_sigma, indexing};
  const Fitter<VariationalGP> f = [&](double lambda, Eigen::Index m) {
    return fitter(data, lambda, m);
  };
  const auto sel = select_discrete(grid, f);
  if (report != nullptr) {
    copy_rows(sel, report);
    report->warnings.insert(report->warnings.end(),
                            sel.selected.model.warnings.begin(),
                            sel.selected.model.warnings.end());
  }
  const SelectionRow &row = sel.chosen_row();
  SeriesSelection out{predict(sel.selected, query), {}, row.sigma_sq, row.m,
                      row.lambda, row.features};
  if (out.band.mean_coefficients) {
    out.coefficients = *out.band.mean_coefficients;
  }
  return out;
}

HyperGrid grid_for(const ExperimentConfig &c, std::int64_t n) {
  HyperGrid g;
  switch (c.prior) {
    case PriorFamily::Poly:
      g = poly_grid(c.beta_minus, c.beta_plus, n, c.c_m);
      break;
    case PriorFamily::Exp:
      g = exp_grid(c.beta_minus, 1, n, c.c_m);
      break;
    case PriorFamily::Dim:
      g = dim_grid(n, c.coarsen);
      break;
  }
  if (c.experiment == "fit") {
    g.values = {*c.lambda};
    g.masses = {1.0};
  }
  if (c.m) {
    const Eigen::Index m = *c.m;
    g.m_rule = [m](double) { return m; };
  }
  return g;
}

RunReport run_running(const ExperimentConfig &c) {
  RunReport report;
  report.experiment = c.experiment;
  Dataset data = load_running_csv(c.data_path);
  if (data.size() < 2) {
    throw ValidationError("running: need at least two observations");
  }
  const double sd = std::sqrt(sample_variance(data.y));
  const auto [lo_it, hi_it] = std::minmax_element(data.x.begin(), data.x.end());
  const double range = std::max(*hi_it - *lo_it, 1e-9);
  const SeParams init{0.5 * sd, sd * sd, range / 50.0};
  const SeParams lower{1e-3 * sd, 1e-4 * sd * sd, range / static_cast<double>(data.size())};
  const SeParams upper{10.0 * sd, 1e3 * sd * sd, 10.0 * range};
  ContinuousOptions opts;
  SeParams start = init;
  if (c.sigma_sq) {
    opts.free[0] = false;
    start.sigma = std::sqrt(*c.sigma_sq);
  }
  const auto query = linspace(*lo_it, *hi_it, c.query_size);
  if (c.experiment == "running-eb") {
    const ContinuousReport rep = tune_mmle(data, start, lower, upper, opts);
    report.chosen = {{"sigma", rep.chosen.sigma},
                     {"nu", rep.chosen.nu},
                     {"tau", rep.chosen.tau}};
    report.sigma_sq = rep.chosen.sigma * rep.chosen.sigma;
    report.warnings = rep.warnings;
    fill_band(exact_posterior(SquaredExponential{rep.chosen.nu, rep.chosen.tau},
                              data.with_sigma_sq(report.sigma_sq), query),
              &report);
    return report;
  }
  const Eigen::Index m = std::min<Eigen::Index>(c.m.value_or(150), data.size());
  const ContinuousVbReport vb =
      tune_continuous(data, FeatureFlavor::Sample, m, start, lower, upper, opts);
  report.chosen = {{"sigma", vb.report.chosen.sigma},
                   {"nu", vb.report.chosen.nu},
                   {"tau", vb.report.chosen.tau}};
  report.sigma_sq = vb.fit.sigma_sq;
  report.m = vb.fit.model.m();
  report.warnings = vb.report.warnings;
  fill_band(predict(vb.fit, query), &report);
  return report;
}

}  // namespace

PriorFamily parse_prior_family(const std::string &s) {
  if (s == "poly") return PriorFamily::Poly;
  if (s == "exp") return PriorFamily::Exp;
  if (s == "dim") return PriorFamily::Dim;
  throw ValidationError("unknown prior family '" + s + "' (poly|exp|dim)");
}

std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::Poly: return "poly";
    case PriorFamily::Exp: return "exp";
    case PriorFamily::Dim: return "dim";
  }
  return "?";
}

FeatureFlavor parse_flavor(const std::string &s) {
  if (s == "population") return FeatureFlavor::Population;
  if (s == "sample") return FeatureFlavor::Sample;
  throw ValidationError("unknown feature flavor '" + s +
                        "' (population|sample)");
}

Indexing parse_indexing(const std::string &s) {
  if (s == "frequency") return Indexing::Frequency;
  if (s == "sequential") return Indexing::Sequential;
  throw ValidationError("unknown indexing '" + s + "' (frequency|sequential)");
}

std::string to_string(Indexing i) {
  return i == Indexing::Frequency ? "frequency" : "sequential";
}

std::string to_string(FeatureFlavor f) {
  return f == FeatureFlavor::Population ? "population" : "sample";
}

void ExperimentConfig::apply(const std::map<std::string, std::string> &kv) {
  for (const auto &[key, raw] : kv) {
    const std::string value = trim(raw);
    if (key == "experiment") {
      experiment = value;
    } else if (key == "n") {
      n = require_integer(key, value);
    } else if (key == "seed") {
      const auto s = require_integer(key, value);
      if (s < 0) throw ValidationError("config: seed must be >= 0");
      seed = static_cast<std::uint64_t>(s);
    } else if (key == "prior") {
      prior = parse_prior_family(value);
    } else if (key == "features") {
      features = parse_flavor(value);
    } else if (key == "indexing") {
      indexing = parse_indexing(value);
    } else if (key == "cm") {
      c_m = require_number(key, value);
    } else if (key == "m") {
      m = require_integer(key, value);
    } else if (key == "sigma2") {
      if (value == "estimate") {
        sigma_sq.reset();
      } else {
        sigma_sq = require_number(key, value);
      }
    } else if (key == "true_sigma2") {
      true_sigma_sq = require_number(key, value);
    } else if (key == "beta_minus") {
      beta_minus = require_number(key, value);
    } else if (key == "beta_plus") {
      beta_plus = require_number(key, value);
    } else if (key == "coarsen") {
      coarsen = require_bool(key, value);
    } else if (key == "lambda") {
      lambda = require_number(key, value);
    } else if (key == "signal") {
      signal = value;
    } else if (key == "signal_beta") {
      signal_beta = require_number(key, value);
    } else if (key == "query") {
      query_size = require_integer(key, value);
    } else if (key == "data") {
      data_path = value;
    } else if (key == "out") {
      out_dir = value;
    } else {
      throw ValidationError("config: unknown key '" + key + "'");
    }
  }
}

void ExperimentConfig::validate() const {
  const bool synthetic = experiment == "select" || experiment == "fit";
  if (!synthetic && experiment != "running" && experiment != "running-eb") {
    throw ValidationError("config: unknown experiment '" + experiment + "'");
  }
  if (synthetic) {
    if (n < 1) {
      throw ValidationError("config: n must be >= 1");
    }
    if (!seed) {
      throw ValidationError("config: synthetic runs need a seed");
    }
    if (!(true_sigma_sq > 0.0)) {
      throw ValidationError("config: true_sigma2 must be positive");
    }
    if (signal != "example" && signal != "sobolev") {
      throw ValidationError("config: signal must be example or sobolev");
    }
  } else if (data_path.empty()) {
    throw ValidationError("config: running experiments need data=<csv>");
  }
  if (experiment == "fit" && !lambda) {
    throw ValidationError("config: fit needs lambda");
  }
  if (!(c_m > 0.0)) {
    throw ValidationError("config: cm must be positive");
  }
  if (m && *m < 1) {
    throw ValidationError("config: m must be >= 1");
  }
  if (sigma_sq && !(*sigma_sq > 0.0)) {
    throw ValidationError("config: sigma2 must be positive or 'estimate'");
  }
  if (query_size < 2) {
    throw ValidationError("config: query grid needs at least two points");
  }
  if (!(beta_minus > 0.0 && beta_plus > beta_minus)) {
    throw ValidationError("config: need 0 < beta_minus < beta_plus");
  }
}

std::vector<std::pair<std::string, std::string>> read_config_pairs(
    const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file " + path.string());
  }
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    const std::string t = trim(line);
    if (t.empty()) {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) +
                           ": expected key = value",
                       lineno);
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  ExperimentConfig c;
  for (const auto &[k, v] : read_config_pairs(path)) {
    c.apply({{k, v}});
  }
  return c;
}

SimulatedData simulate(const SignalSpec &truth, std::int64_t n,
                       std::uint64_t seed, double sigma_sq) {
  if (n < 1) {
    throw ValidationError("simulate: n must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, kTwoPi);
  std::normal_distribution<double> noise(0.0, std::sqrt(sigma_sq));
  SimulatedData out;
  out.truth = truth;
  out.data.sigma_sq = sigma_sq;
  out.data.x.resize(static_cast<std::size_t>(n));
  for (auto &x : out.data.x) {
    x = unif(rng);
  }
  out.data.y = synth_signal(truth, out.data.x);
  for (Eigen::Index i = 0; i < out.data.y.size(); ++i) {
    out.data.y(i) += noise(rng);
  }
  return out;
}

SimulatedData simulate_poly(std::int64_t n, std::uint64_t seed,
                            double sigma_sq) {
  return simulate(example_signal(), n, seed, sigma_sq);
}

Dataset load_running_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open data file " + path.string());
  }
  Dataset data;
  std::vector<double> ys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() < 2) {
      throw ParseError("line " + std::to_string(lineno) +
                           ": expected at least two columns",
                       lineno);
    }
    const auto t = parse_number(cells[0]);
    const auto v = parse_number(cells[1]);
    if (!t && !v && lineno == 1) {
      continue;  // header
    }
    if (!t || !v) {
      throw ParseError("line " + std::to_string(lineno) + ": non-numeric cell",
                       lineno);
    }
    data.x.push_back(*t);
    ys.push_back(*v);
  }
  data.y = Eigen::Map<VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return data;
}

std::vector<double> linspace(double a, double b, Eigen::Index count) {
  std::vector<double> out(static_cast<std::size_t>(std::max<Eigen::Index>(count, 0)));
  if (count == 1) {
    out[0] = a;
  }
  for (Eigen::Index i = 0; count > 1 && i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

std::vector<double> quadrature_nodes(Eigen::Index count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] =
        kTwoPi * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
  }
  return out;
}

double band_coverage(const VectorXd &truth, const VectorXd &lower,
                     const VectorXd &upper) {
  if (truth.size() == 0) {
    return 0.0;
  }
  Eigen::Index hit = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    hit += (truth(i) >= lower(i) && truth(i) <= upper(i)) ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

RunReport run_experiment(const ExperimentConfig &config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  if (config.experiment == "running" || config.experiment == "running-eb") {
    RunReport r = run_running(config);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

  const SignalSpec truth = config.signal == "example"
                               ? example_signal()
                               : sobolev_signal(config.signal_beta);
  SimulatedData sim = simulate(truth, config.n, *config.seed, config.true_sigma_sq);
  const bool estimate = !config.sigma_sq.has_value();
  sim.data.sigma_sq =
      estimate ? 0.5 * sample_variance(sim.data.y) : *config.sigma_sq;

  const HyperGrid grid = grid_for(config, config.n);
  const auto query = linspace(0.0, kTwoPi, config.query_size);

  RunReport report;
  report.experiment = config.experiment;
  const SeriesSelection sel = select_series(config.prior, sim.data, grid,
                                            config.features, config.indexing,
                                            estimate, query, &report);
  report.chosen = {{"lambda", sel.lambda}};
  report.m = sel.m;
  report.features = sel.features;
  report.sigma_sq = sel.sigma_sq;
  fill_band(sel.band, &report);
  report.truth = synth_signal(truth, query);
  report.coverage = band_coverage(*report.truth, report.lower, report.upper);
  // L2(G) error on the midpoint rule.
  const auto nodes = quadrature_nodes();
  const VectorXd truth_nodes = synth_signal(truth, nodes);
  const VectorXd mean_nodes =
      FourierBasis().design(nodes, sel.coefficients.size()) * sel.coefficients;
  report.l2_error = std::sqrt((mean_nodes - truth_nodes).squaredNorm() /
                              static_cast<double>(nodes.size()));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::pair<double, double> log_log_slope(
    const std::vector<std::int64_t> &n_list,
    const std::vector<std::vector<double>> &errors) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    for (double e : errors[i]) {
      xs.push_back(std::log(static_cast<double>(n_list[i])));
      ys.push_back(std::log(e));
    }
  }
  const auto k = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / k;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / k;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - my - slope * (xs[i] - mx);
    rss += r * r;
  }
  const double se = k > 2.0 ? std::sqrt(rss / (k - 2.0) / sxx) : 0.0;
  return {slope, se};
}

ContractionReport contraction_study(const ContractionSettings &s) {
  if (s.n_list.size() < 3 ||
      !std::is_sorted(s.n_list.begin(), s.n_list.end()) ||
      std::adjacent_find(s.n_list.begin(), s.n_list.end()) != s.n_list.end()) {
    throw ValidationError("contraction: need >= 3 increasing sample sizes");
  }
  if (s.replicates < 5) {
    throw ValidationError("contraction: need >= 5 replicates");
  }
  ContractionReport rep;
  rep.n_list = s.n_list;
  rep.target_slope = -s.beta_true / (1.0 + 2.0 * s.beta_true);
  const SignalSpec truth = sobolev_signal(s.beta_true);
  const std::vector<double> no_query{0.0};
  for (std::size_t i = 0; i < s.n_list.size(); ++i) {
    const std::int64_t n = s.n_list[i];
    HyperGrid grid;
    switch (s.family) {
      case PriorFamily::Poly:
        grid = poly_grid(s.beta_minus, s.beta_plus, n);
        break;
      case PriorFamily::Exp:
        grid = exp_grid(s.beta_minus, 1, n);
        break;
      case PriorFamily::Dim:
        grid = dim_grid(n);
        break;
    }
    std::vector<double> errs;
    for (int r = 0; r < s.replicates; ++r) {
      const SimulatedData sim =
          simulate(truth, n, replicate_seed(s.seed, i, r), s.sigma_sq);
      const SeriesSelection sel =
          select_series(s.family, sim.data, grid, FeatureFlavor::Population,
                        s.indexing, false, no_query, nullptr);
      errs.push_back(series_l2_error(sel.coefficients, truth));
    }
    rep.mean_errors.push_back(std::accumulate(errs.begin(), errs.end(), 0.0) /
                              static_cast<double>(errs.size()));
    rep.errors.push_back(std::move(errs));
  }
  std::tie(rep.slope, rep.slope_se) = log_log_slope(rep.n_list, rep.errors);
  return rep;
}

}  // namespace asvb
