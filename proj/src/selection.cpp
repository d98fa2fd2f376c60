#include "asvb/selection.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace asvb {

namespace {

constexpr double kGridSlack = 1e-12;
constexpr double kBoundaryTol = 1e-3;  // log-space distance to a bound

std::vector<double> uniform_masses(std::size_t k) {
  return std::vector<double>(k, 1.0 / static_cast<double>(k));
}

NelderMeadOptions sigma_search_options() {
  NelderMeadOptions o;
  o.max_iterations = 200;
  o.diameter_tol = 1e-7;
  o.initial_step = 0.5;
  return o;
}

}  // namespace

void HyperGrid::validate() const {
  if (values.empty()) {
    throw ValidationError("hyper grid is empty");
  }
  if (values.size() != masses.size()) {
    throw ValidationError("hyper grid: values and masses differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw ValidationError("hyper grid: values must be strictly increasing");
    }
    if (!(masses[i] > 0.0)) {
      throw ValidationError("hyper grid: masses must be positive");
    }
    total += masses[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("hyper grid: masses must sum to one");
  }
  if (!m_rule) {
    throw ValidationError("hyper grid: missing feature-count rule");
  }
}

Eigen::Index ceil_count(double v) {
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) {
    return static_cast<Eigen::Index>(r);
  }
  return static_cast<Eigen::Index>(std::ceil(v));
}

HyperGrid poly_grid(double beta_minus, double beta_plus, std::int64_t n,
                    double c_m, int d) {
  if (!(beta_minus > 0.0 && beta_minus < beta_plus)) {
    throw ValidationError("poly_grid: need 0 < beta_minus < beta_plus");
  }
  if (n < 3) {
    throw ValidationError("poly_grid: need n >= 3");
  }
  if (!(c_m > 0.0)) {
    throw ValidationError("poly_grid: c_m must be positive");
  }
  const double step = 1.0 / std::log(static_cast<double>(n));
  HyperGrid g;
  g.family = GridFamily::Poly;
  for (int k = 0;; ++k) {
    const double v = beta_minus + k * step;
    if (v > beta_plus + kGridSlack) {
      break;
    }
    g.values.push_back(v);
  }
  g.masses = uniform_masses(g.values.size());
  const auto nn = static_cast<double>(n);
  const double dd = d;
  g.m_rule = [=](double alpha) {
    return std::max<Eigen::Index>(
        1, ceil_count(c_m * std::pow(nn, dd / (dd + 2.0 * alpha))));
  };
  return g;
}

HyperGrid exp_grid(double beta_minus, int d, std::int64_t n, double c_m) {
  if (!(beta_minus > 0.0)) {
    throw ValidationError("exp_grid: beta_minus must be positive");
  }
  if (n < 2) {
    throw DomainError("exp_grid: n too small");
  }
  const double logn = std::log(static_cast<double>(n));
  const auto count =
      static_cast<int>(std::floor(logn / (d + 2.0 * beta_minus) + 1e-12));
  if (count < 1) {
    throw DomainError("exp_grid: n too small for a nonempty grid");
  }
  HyperGrid g;
  g.family = GridFamily::Exp;
  for (int j = count; j >= 1; --j) {
    g.values.push_back(std::exp(-static_cast<double>(j)));
  }
  g.masses = uniform_masses(g.values.size());
  const double dd = d;
  g.m_rule = [=](double tau) {
    return std::max<Eigen::Index>(
        1, ceil_count(c_m * std::pow(tau, -dd) * std::pow(logn, dd + 1.0)));
  };
  return g;
}

HyperGrid dim_grid(std::int64_t n, bool coarsen) {
  if (n < 1) {
    throw ValidationError("dim_grid: need n >= 1");
  }
  auto top = static_cast<std::int64_t>(std::floor(std::sqrt(static_cast<double>(n))));
  while ((top + 1) * (top + 1) <= n) {
    ++top;
  }
  while (top * top > n) {
    --top;
  }
  HyperGrid g;
  g.family = GridFamily::Dim;
  if (coarsen) {
    for (std::int64_t v = 1; v <= top; v *= 2) {
      g.values.push_back(static_cast<double>(v));
    }
  } else {
    for (std::int64_t v = 1; v <= top; ++v) {
      g.values.push_back(static_cast<double>(v));
    }
  }
  g.masses = uniform_masses(g.values.size());
  g.m_rule = [](double dim) { return static_cast<Eigen::Index>(std::llround(dim)); };
  return g;
}

SeriesPrior prior_for(GridFamily family, double lambda, Indexing indexing) {
  switch (family) {
    case GridFamily::Poly:
      return SeriesPrior::poly(lambda, 1, indexing);
    case GridFamily::Exp:
      return SeriesPrior::exp(lambda, 1, indexing);
    case GridFamily::Dim:
      return SeriesPrior::truncated(std::llround(lambda));
    case GridFamily::KernelContinuous:
      break;
  }
  throw ValidationError("prior_for: no series prior for a continuous family");
}

double estimate_sigma_sq(const InducingModel &model, const Dataset &data,
                         double start) {
  const InducingStats stats = inducing_stats(model, data.y);
  auto objective = [&](const Eigen::VectorXd &p) {
    try {
      return -collapsed_elbo(model.kuu, stats, std::exp(p(0)));
    } catch (const ConditioningError &) {
      return std::numeric_limits<double>::infinity();
    }
  };
  Eigen::VectorXd x0(1);
  x0 << std::log(start);
  const NelderMeadResult r = nelder_mead(objective, x0, sigma_search_options());
  return std::exp(r.argmin(0));
}

FitOutcome<VariationalGP> SeriesInducingFitter::operator()(
    const Dataset &data, double lambda, Eigen::Index m) const {
  const SeriesPrior prior = prior_for(family, lambda, indexing);
  const Eigen::Index count = prior.basis_count(m);
  InducingModel model;
  if (flavor == FeatureFlavor::Population) {
    model = population_features(prior, data.x, count);
  } else {
    const SeriesKernel sk{prior, default_population_truncation(count)};
    model = sample_features(KernelSpec(sk), data.x,
                            std::min<Eigen::Index>(count, data.size()));
  }
  Dataset fitted = data;
  if (estimate_sigma) {
    fitted.sigma_sq = estimate_sigma_sq(model, data, data.sigma_sq);
  }
  const bool paired = count != m;
  FitOutcome<VariationalGP> out{titsias_fit(model, fitted),
                                elbo_lambda(model, fitted),
                                paired ? m : model.m(), fitted.sigma_sq,
                                model.m()};
  return out;
}

FitOutcome<MeanFieldFit> MeanFieldFitter::operator()(const Dataset &data,
                                                     double lambda,
                                                     Eigen::Index m) const {
  const auto dim = static_cast<Eigen::Index>(std::llround(lambda));
  DesignMatrix dm;
  if (full_design != nullptr && full_design->dimension() >= dim) {
    dm.phi = full_design->phi.leftCols(dim);
    dm.gram = full_design->gram.topLeftCorner(dim, dim);
  } else {
    dm = design_matrix(FourierBasis(), data.x, dim);
  }
  Dataset fitted = data;
  if (estimate_sigma) {
    auto objective = [&](const Eigen::VectorXd &p) {
      return -mf_fit(dm, data.with_sigma_sq(std::exp(p(0))), 1.0).elbo;
    };
    Eigen::VectorXd x0(1);
    x0 << std::log(data.sigma_sq);
    fitted.sigma_sq =
        std::exp(nelder_mead(objective, x0, sigma_search_options()).argmin(0));
  }
  MeanFieldFit fit = mf_fit(dm, fitted, 1.0);
  const double elbo = fit.elbo;
  (void)m;
  return {std::move(fit), elbo, dim, fitted.sigma_sq};
}

namespace {

struct LogBox {
  std::array<double, 3> lo;
  std::array<double, 3> hi;
  std::array<double, 3> fixed;
  std::array<bool, 3> free;

  std::array<double, 3> expand(const Eigen::VectorXd &p, bool *inside) const {
    std::array<double, 3> out = fixed;
    Eigen::Index k = 0;
    *inside = true;
    for (std::size_t i = 0; i < 3; ++i) {
      if (free[i]) {
        out[i] = p(k++);
        if (out[i] < lo[i] || out[i] > hi[i]) {
          *inside = false;
        }
      }
    }
    return out;
  }
};

LogBox make_box(const SeParams &init, const SeParams &lower,
                const SeParams &upper, const ContinuousOptions &opts,
                Eigen::VectorXd *start) {
  const auto i = init.as_array();
  const auto l = lower.as_array();
  const auto u = upper.as_array();
  LogBox box;
  box.free = opts.free;
  std::vector<double> s;
  for (std::size_t k = 0; k < 3; ++k) {
    if (!(l[k] > 0.0 && u[k] > l[k] && std::isfinite(u[k]))) {
      throw ValidationError("continuous tuning: bounds must be finite, "
                            "positive and ordered");
    }
    if (!(i[k] > l[k] && i[k] < u[k])) {
      throw ValidationError("continuous tuning: init must be interior");
    }
    box.lo[k] = std::log(l[k]);
    box.hi[k] = std::log(u[k]);
    box.fixed[k] = std::log(i[k]);
    if (box.free[k]) {
      s.push_back(box.fixed[k]);
    }
  }
  if (s.empty()) {
    throw ValidationError("continuous tuning: no free parameter");
  }
  *start = Eigen::Map<Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
  return box;
}

ContinuousReport run_search(
    const std::function<double(const SeParams &)> &objective,
    const SeParams &init, const SeParams &lower, const SeParams &upper,
    const ContinuousOptions &opts) {
  Eigen::VectorXd start;
  const LogBox box = make_box(init, lower, upper, opts, &start);
  ContinuousReport rep;
  int ok_evals = 0;
  auto f = [&](const Eigen::VectorXd &p) {
    bool inside = false;
    const auto logp = box.expand(p, &inside);
    if (!inside) {
      return std::numeric_limits<double>::infinity();
    }
    const SeParams par{std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
    try {
      const double v = objective(par);
      ++ok_evals;
      return -v;
    } catch (const ConditioningError &) {
      ++rep.failed_evaluations;
    } catch (const DomainError &) {
      ++rep.failed_evaluations;
    }
    return std::numeric_limits<double>::infinity();
  };
  const NelderMeadResult r = nelder_mead(f, start, opts.nelder_mead);
  if (ok_evals == 0 || !std::isfinite(r.value)) {
    throw ConditioningError("continuous tuning: every evaluation failed");
  }
  bool inside = false;
  const auto logp = box.expand(r.argmin, &inside);
  rep.chosen = {std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
  rep.objective = -r.value;
  rep.iterations = r.iterations;
  rep.evaluations = r.evaluations;
  rep.converged = r.converged;
  static constexpr const char *kNames[] = {"sigma", "nu", "tau"};
  for (std::size_t k = 0; k < 3; ++k) {
    if (box.free[k] && (logp[k] - box.lo[k] < kBoundaryTol ||
                        box.hi[k] - logp[k] < kBoundaryTol)) {
      rep.boundary_pinned = true;
      rep.warnings.push_back(std::string("optimum pinned at the ") +
                             kNames[k] + " bound");
    }
  }
  if (!rep.converged) {
    rep.warnings.push_back("Nelder-Mead stopped at the iteration cap");
  }
  return rep;
}

// Unit-amplitude sample features for the most recent tau; nu rescales.
class SampleFeatureCache {
 public:
  SampleFeatureCache(const Dataset &data, Eigen::Index m) : data_(data), m_(m) {}

  const InducingModel &unit_model(double tau) {
    if (!model_ || tau != tau_) {
      const KernelSpec k = SquaredExponential{1.0, tau};
      model_ = std::make_unique<InducingModel>(sample_features(k, data_.x, m_));
      stats_ = inducing_stats(*model_, data_.y);
      tau_ = tau;
    }
    return *model_;
  }
  const InducingStats &unit_stats() const { return stats_; }

 private:
  const Dataset &data_;
  Eigen::Index m_;
  double tau_ = 0.0;
  std::unique_ptr<InducingModel> model_;
  InducingStats stats_;
};

InducingModel scaled(const InducingModel &unit, double nu) {
  InducingModel out = unit;
  out.kuu *= nu;
  out.kuf *= nu;
  out.kff_diag *= nu;
  out.eigvals *= nu;
  if (out.kernel) {
    auto se = std::get<SquaredExponential>(*out.kernel);
    se.nu = nu;
    out.kernel = se;
  }
  return out;
}

}  // namespace

ContinuousVbReport tune_continuous(const Dataset &data, FeatureFlavor flavor,
                                   Eigen::Index m, const SeParams &init,
                                   const SeParams &lower, const SeParams &upper,
                                   const ContinuousOptions &opts) {
  if (flavor != FeatureFlavor::Sample) {
    throw ValidationError("tune_continuous: the squared-exponential kernel "
                          "has no closed-form eigenfunctions; use sample "
                          "features");
  }
  if (data.size() < 1) {
    throw ValidationError("tune_continuous: need at least one observation");
  }
  if (m < 1 || m > data.size()) {
    throw ValidationError("tune_continuous: need 1 <= m <= n");
  }
  SampleFeatureCache cache(data, m);
  auto objective = [&](const SeParams &p) {
    const InducingModel &unit = cache.unit_model(p.tau);
    InducingStats s = cache.unit_stats();
    s.cross_gram *= p.nu * p.nu;
    s.cross_y *= p.nu;
    s.kff_trace *= p.nu;
    return collapsed_elbo(unit.kuu * p.nu, s, p.sigma * p.sigma);
  };
  ContinuousVbReport out;
  if (!opts.free[2] || !(opts.free[0] || opts.free[1])) {
    out.report = run_search(objective, init, lower, upper, opts);
  } else {
    // Each tau costs an eigensolve while (sigma, nu) only rescale the
    // cached stats, so profile them out inside a search over tau alone.
    ContinuousOptions inner = opts;
    inner.free[2] = false;
    ContinuousOptions outer = opts;
    outer.free = {false, false, true};
    int inner_evals = 0;
    auto profile = [&](double tau) {
      SeParams start = init;
      start.tau = tau;
      ContinuousReport r = run_search(objective, start, lower, upper, inner);
      inner_evals += r.evaluations;
      return r;
    };
    out.report = run_search([&](const SeParams &p) { return profile(p.tau).objective; },
                            init, lower, upper, outer);
    const ContinuousReport best = profile(out.report.chosen.tau);
    out.report.chosen = best.chosen;
    out.report.objective = best.objective;
    out.report.evaluations += inner_evals;
    out.report.converged = out.report.converged && best.converged;
    out.report.boundary_pinned = out.report.boundary_pinned || best.boundary_pinned;
    out.report.warnings.insert(out.report.warnings.end(), best.warnings.begin(),
                               best.warnings.end());
  }
  const SeParams &c = out.report.chosen;
  const InducingModel model = scaled(cache.unit_model(c.tau), c.nu);
  out.report.warnings.insert(out.report.warnings.end(), model.warnings.begin(),
                             model.warnings.end());
  out.fit = titsias_fit(model, data.with_sigma_sq(c.sigma * c.sigma));
  return out;
}

ContinuousReport tune_mmle(const Dataset &data, const SeParams &init,
                           const SeParams &lower, const SeParams &upper,
                           const ContinuousOptions &opts) {
  if (data.size() < 1) {
    throw ValidationError("tune_mmle: need at least one observation");
  }
  auto objective = [&](const SeParams &p) {
    return log_evidence(SquaredExponential{p.nu, p.tau},
                        data.with_sigma_sq(p.sigma * p.sigma));
  };
  return run_search(objective, init, lower, upper, opts);
}

}  // namespace asvb
