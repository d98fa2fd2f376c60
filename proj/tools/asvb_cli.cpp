// Command-line front end: simulate data, run adaptive fits and emit reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "asvb/errors.hpp"
#include "asvb/experiments.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::map<std::string, std::string> overrides;
};

// Registers a flag whose value, when given, overrides config key `key`.
void override_option(CLI::App *app, Common *common, const std::string &flag,
                     const std::string &key, const std::string &help) {
  app->add_option_function<std::string>(
      flag, [common, key](const std::string &v) { common->overrides[key] = v; },
      help);
}

asvb::ExperimentConfig build_config(const Common &c, const std::string &experiment) {
  asvb::ExperimentConfig cfg;
  if (!c.config.empty()) {
    cfg = asvb::load_config(c.config);
  }
  cfg.experiment = experiment;
  cfg.apply(c.overrides);
  return cfg;
}

void print_report(const asvb::RunReport &r) {
  for (const auto &[k, v] : r.chosen) {
    std::cout << k << " = " << asvb::format_double(v) << '\n';
  }
  std::cout << "m = " << r.m;
  if (r.features > 0 && r.features != r.m) std::cout << "\nfeatures = " << r.features;
  std::cout << "\nsigma_sq = " << asvb::format_double(r.sigma_sq)
            << '\n';
  if (r.l2_error) {
    std::cout << "l2_error = " << asvb::format_double(*r.l2_error) << '\n';
  }
  if (r.coverage) {
    std::cout << "coverage = " << asvb::format_double(*r.coverage) << '\n';
  }
  for (const auto &w : r.warnings) {
    std::cerr << "warning: " << w << '\n';
  }
}

int run_and_emit(const asvb::ExperimentConfig &cfg) {
  const asvb::RunReport report = asvb::run_experiment(cfg);
  asvb::emit_report(report, asvb::ReportFormat::Csv, cfg.out_dir);
  asvb::emit_report(report, asvb::ReportFormat::Svg, cfg.out_dir);
  print_report(report);
  std::cout << "wrote " << cfg.out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Adaptive sparse variational Bayes for GP regression"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", common.config, "key = value config file");
    override_option(sub, &common, "--n", "n", "sample size");
    override_option(sub, &common, "--seed", "seed", "random seed");
    override_option(sub, &common, "--prior", "prior", "poly | exp | dim");
    override_option(sub, &common, "--features", "features", "population | sample");
    override_option(sub, &common, "--indexing", "indexing", "frequency | sequential spectrum indexing");
    override_option(sub, &common, "--cm", "cm", "feature-count multiplier");
    override_option(sub, &common, "--m", "m", "fixed number of features");
    override_option(sub, &common, "--sigma2", "sigma2", "noise variance or 'estimate'");
    override_option(sub, &common, "--out", "out", "output directory");
    override_option(sub, &common, "--beta-minus", "beta_minus", "grid lower bound");
    override_option(sub, &common, "--beta-plus", "beta_plus", "grid upper bound");
    override_option(sub, &common, "--query", "query", "query grid size");
    override_option(sub, &common, "--signal", "signal", "example | sobolev");
    override_option(sub, &common, "--signal-beta", "signal_beta", "smoothness of the sobolev signal");
    override_option(sub, &common, "--true-sigma2", "true_sigma2", "noise variance of simulated data");
  };

  auto *simulate = app.add_subcommand("simulate", "write a simulated data set");
  std::int64_t sim_n = 10000;
  std::uint64_t sim_seed = 1;
  double sim_sigma2 = 0.01;
  std::string sim_out = "out";
  simulate->add_option("--n", sim_n, "sample size");
  simulate->add_option("--seed", sim_seed, "random seed")->required();
  simulate->add_option("--sigma2", sim_sigma2, "noise variance");
  simulate->add_option("--out", sim_out, "output directory");

  auto *fit = app.add_subcommand("fit", "fit at a fixed hyperparameter");
  add_common(fit);
  override_option(fit, &common, "--lambda", "lambda", "hyperparameter value");

  auto *select = app.add_subcommand("select", "adaptive selection over the grid");
  add_common(select);
  override_option(select, &common, "--coarsen", "coarsen", "powers-of-two D grid");

  auto *running = app.add_subcommand("running", "squared-exponential fit of the running data");
  add_common(running);
  override_option(running, &common, "--data", "data", "CSV with t_sec, speed_kmh");
  bool running_eb = false;
  running->add_flag("--eb", running_eb, "empirical Bayes instead of variational");

  auto *contraction = app.add_subcommand("contraction", "empirical contraction-rate study");
  std::string c_prior = "dim";
  double c_beta = 1.0;
  std::vector<std::int64_t> c_nlist{500, 2000, 8000};
  int c_reps = 10;
  std::uint64_t c_seed = 1;
  double c_sigma2 = 1.0;
  std::string c_out = "out";
  contraction->add_option("--prior", c_prior, "poly | exp | dim");
  contraction->add_option("--beta", c_beta, "smoothness of the truth");
  contraction->add_option("--n-list", c_nlist, "sample sizes")->delimiter(',');
  contraction->add_option("--replicates", c_reps, "replicates per n");
  contraction->add_option("--seed", c_seed, "random seed");
  contraction->add_option("--sigma2", c_sigma2, "noise variance");
  contraction->add_option("--out", c_out, "output directory");

  auto *report = app.add_subcommand("report", "render a band table as SVG");
  std::string r_in;
  std::string r_out = "out";
  report->add_option("--in", r_in, "band.csv")->required();
  report->add_option("--out", r_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*simulate) {
      const auto sim = asvb::simulate_poly(sim_n, sim_seed, sim_sigma2);
      std::filesystem::create_directories(sim_out);
      std::ofstream out(std::filesystem::path(sim_out) / "data.csv");
      out << "x,y,truth\n";
      for (std::size_t i = 0; i < sim.data.x.size(); ++i) {
        out << asvb::format_double(sim.data.x[i]) << ','
            << asvb::format_double(sim.data.y(static_cast<Eigen::Index>(i))) << ','
            << asvb::format_double(asvb::synth_signal(sim.truth, sim.data.x[i]))
            << '\n';
      }
      std::cout << "wrote " << sim_out << "/data.csv\n";
      return 0;
    }
    if (*fit) {
      return run_and_emit(build_config(common, "fit"));
    }
    if (*select) {
      return run_and_emit(build_config(common, "select"));
    }
    if (*running) {
      return run_and_emit(build_config(common, running_eb ? "running-eb" : "running"));
    }
    if (*contraction) {
      asvb::ContractionSettings s;
      s.family = asvb::parse_prior_family(c_prior);
      s.beta_true = c_beta;
      s.n_list = c_nlist;
      s.replicates = c_reps;
      s.seed = c_seed;
      s.sigma_sq = c_sigma2;
      const auto rep = asvb::contraction_study(s);
      std::filesystem::create_directories(c_out);
      std::ofstream out(std::filesystem::path(c_out) / "contraction.csv");
      out << "n,mean_l2_error\n";
      for (std::size_t i = 0; i < rep.n_list.size(); ++i) {
        out << rep.n_list[i] << ',' << asvb::format_double(rep.mean_errors[i]) << '\n';
      }
      std::cout << "slope = " << asvb::format_double(rep.slope) << " (se "
                << asvb::format_double(rep.slope_se) << "), target "
                << asvb::format_double(rep.target_slope) << '\n';
      return 0;
    }
    if (*report) {
      const auto r = asvb::read_band_csv(r_in);
      for (const auto &p : asvb::emit_report(r, asvb::ReportFormat::Svg, r_out)) {
        std::cout << "wrote " << p.string() << '\n';
      }
      return 0;
    }
  } catch (const asvb::ConditioningError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const asvb::ParseError &e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const asvb::ValidationError &e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const asvb::DomainError &e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
