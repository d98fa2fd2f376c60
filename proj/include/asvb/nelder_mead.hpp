#pragma once

#include <functional>

#include <Eigen/Dense>

namespace asvb {

struct NelderMeadOptions {
  int max_iterations = 200;
  double diameter_tol = 1e-6;  // simplex diameter (max vertex distance to best)
  double initial_step = 0.25;
};

struct NelderMeadResult {
  Eigen::VectorXd argmin;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes `f` from `start` with the standard reflection / expansion /
/// contraction / shrink moves (coefficients 1, 2, 1/2, 1/2). Non-finite
/// function values are treated as +inf.
NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd &)> &f,
    const Eigen::VectorXd &start, const NelderMeadOptions &opts = {});

}  // namespace asvb
