#include "asvb/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace asvb {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

}  // namespace

NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd &)> &f,
    const Eigen::VectorXd &start, const NelderMeadOptions &opts) {
  const Eigen::Index dim = start.size();
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd &p) {
    ++res.evaluations;
    const double v = f(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim + 1), start);
  std::vector<double> vals(pts.size());
  for (Eigen::Index i = 0; i < dim; ++i) {
    pts[static_cast<std::size_t>(i + 1)](i) += opts.initial_step;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = eval(pts[i]);
  }

  std::vector<std::size_t> order(pts.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (std::size_t i : order) {
      p2.push_back(pts[i]);
      v2.push_back(vals[i]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      d = std::max(d, (pts[i] - pts[0]).lpNorm<Eigen::Infinity>());
    }
    return d;
  };

  sort_simplex();
  for (res.iterations = 0; res.iterations < opts.max_iterations;
       ++res.iterations) {
    if (diameter() < opts.diameter_tol) {
      res.converged = true;
      break;
    }
    const std::size_t worst = pts.size() - 1;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < worst; ++i) {
      centroid += pts[i];
    }
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd xr = centroid + kReflect * (centroid - pts[worst]);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[worst - 1]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const bool outside = fr < vals[worst];
      const Eigen::VectorXd xc =
          outside ? Eigen::VectorXd(centroid + kContract * (xr - centroid))
                  : Eigen::VectorXd(centroid + kContract * (pts[worst] - centroid));
      const double fc = eval(xc);
      if (fc < std::min(fr, vals[worst])) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts[0] + kShrink * (pts[i] - pts[0]);
          vals[i] = eval(pts[i]);
        }
      }
    }
    sort_simplex();
  }
  if (!res.converged && diameter() < opts.diameter_tol) {
    res.converged = true;
  }
  res.argmin = pts[0];
  res.value = vals[0];
  return res;
}

}  // namespace asvb
