#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "asvb/errors.hpp"
#include "asvb/experiments.hpp"

namespace asvb {

namespace {

constexpr double kSvgWidth = 800.0;
constexpr double kSvgHeight = 400.0;
constexpr double kMargin = 40.0;

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw ValidationError("write failed for " + path.string());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string band_csv(const RunReport &report) {
  std::string out = "x,mean,lo95,hi95,truth\n";
  for (std::size_t i = 0; i < report.query.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out += format_double(report.query[i]) + ',' +
           format_double(report.mean(k)) + ',' + format_double(report.lower(k)) +
           ',' + format_double(report.upper(k)) + ',';
    if (report.truth) {
      out += format_double((*report.truth)(k));
    }
    out += '\n';
  }
  return out;
}

std::string elbo_csv(const RunReport &report) {
  std::string out = "lambda,elbo_lambda,log_mass,elbo,m,features,sigma_sq,ok\n";
  for (const ElboRow &r : report.elbo_table) {
    out += format_double(r.lambda) + ',' + format_double(r.elbo_lambda) + ',' +
           format_double(r.log_mass) + ',' + format_double(r.elbo) + ',' +
           std::to_string(r.m) + ',' + std::to_string(r.features) + ',' +
           format_double(r.sigma_sq) + ',' +
           (r.ok ? "1" : "0") + '\n';
  }
  return out;
}

std::string summary_csv(const RunReport &report) {
  std::string out = "key,value\n";
  out += "experiment," + report.experiment + '\n';
  for (const auto &[k, v] : report.chosen) {
    out += k + ',' + format_double(v) + '\n';
  }
  out += "m," + std::to_string(report.m) + '\n';
  if (report.features > 0) {
    out += "features," + std::to_string(report.features) + '\n';
  }
  out += "sigma_sq," + format_double(report.sigma_sq) + '\n';
  if (report.l2_error) {
    out += "l2_error," + format_double(*report.l2_error) + '\n';
  }
  if (report.coverage) {
    out += "coverage," + format_double(*report.coverage) + '\n';
  }
  out += "seconds," + format_double(report.seconds) + '\n';
  return out;
}

std::string band_svg(const RunReport &report) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth
    << "\" height=\"" << kSvgHeight << "\" viewBox=\"0 0 " << kSvgWidth << ' '
    << kSvgHeight << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const std::size_t q = report.query.size();
  if (q > 0) {
    double xlo = report.query.front();
    double xhi = report.query.back();
    double ylo = std::min(report.lower.minCoeff(), report.mean.minCoeff());
    double yhi = std::max(report.upper.maxCoeff(), report.mean.maxCoeff());
    if (report.truth) {
      ylo = std::min(ylo, report.truth->minCoeff());
      yhi = std::max(yhi, report.truth->maxCoeff());
    }
    if (xhi <= xlo) xhi = xlo + 1.0;
    if (yhi <= ylo) yhi = ylo + 1.0;
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    auto px = [&](double x) {
      return kMargin + (x - xlo) / (xhi - xlo) * (kSvgWidth - 2 * kMargin);
    };
    auto py = [&](double y) {
      return kSvgHeight - kMargin -
             (y - ylo) / (yhi - ylo) * (kSvgHeight - 2 * kMargin);
    };
    auto polyline = [&](const VectorXd &v) {
      std::string pts;
      for (std::size_t i = 0; i < q; ++i) {
        if (i) pts += ' ';
        pts += fixed3(px(report.query[i])) + ',' +
               fixed3(py(v(static_cast<Eigen::Index>(i))));
      }
      return pts;
    };
    std::string band;
    for (std::size_t i = 0; i < q; ++i) {
      band += fixed3(px(report.query[i])) + ',' +
              fixed3(py(report.upper(static_cast<Eigen::Index>(i)))) + ' ';
    }
    for (std::size_t i = q; i-- > 0;) {
      band += fixed3(px(report.query[i])) + ',' +
              fixed3(py(report.lower(static_cast<Eigen::Index>(i))));
      if (i) band += ' ';
    }
    s << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\""
      << kSvgWidth - 2 * kMargin << "\" height=\"" << kSvgHeight - 2 * kMargin
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    s << "<polygon class=\"band\" points=\"" << band
      << "\" fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\"/>\n";
    if (report.truth) {
      s << "<polyline class=\"truth\" points=\"" << polyline(*report.truth)
        << "\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    }
    s << "<polyline class=\"mean\" points=\"" << polyline(report.mean)
      << "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\"/>\n";
    s << "<text x=\"" << kMargin << "\" y=\"" << kMargin - 10
      << "\" font-size=\"12\">" << report.experiment << "  m=" << report.m
      << "  sigma^2=" << fixed3(report.sigma_sq) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> emit_report(
    const RunReport &report, ReportFormat format,
    const std::filesystem::path &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw ValidationError("cannot create output directory " + dir.string());
  }
  std::vector<std::filesystem::path> written;
  if (format == ReportFormat::Csv) {
    write_file(dir / "band.csv", band_csv(report));
    write_file(dir / "elbo.csv", elbo_csv(report));
    write_file(dir / "summary.csv", summary_csv(report));
    written = {dir / "band.csv", dir / "elbo.csv", dir / "summary.csv"};
  } else {
    write_file(dir / "band.svg", band_svg(report));
    written = {dir / "band.svg"};
  }
  return written;
}

RunReport read_band_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open " + path.string());
  }
  RunReport r;
  r.experiment = "report";
  std::vector<double> mean, lo, hi, truth;
  bool has_truth = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells.size() < 4) {
      throw ParseError("band table line " + std::to_string(lineno) +
                           ": expected x,mean,lo95,hi95,truth",
                       lineno);
    }
    try {
      r.query.push_back(std::stod(cells[0]));
      mean.push_back(std::stod(cells[1]));
      lo.push_back(std::stod(cells[2]));
      hi.push_back(std::stod(cells[3]));
      if (cells.size() >= 5 && !cells[4].empty()) {
        truth.push_back(std::stod(cells[4]));
      } else {
        has_truth = false;
      }
    } catch (const std::exception &) {
      throw ParseError("band table line " + std::to_string(lineno) +
                           ": non-numeric cell",
                       lineno);
    }
  }
  auto to_vec = [](const std::vector<double> &v) {
    return VectorXd(Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  r.mean = to_vec(mean);
  r.lower = to_vec(lo);
  r.upper = to_vec(hi);
  if (has_truth && !truth.empty()) {
    r.truth = to_vec(truth);
  }
  return r;
}

}  // namespace asvb
