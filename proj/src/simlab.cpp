#include "exconf/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "exconf/conformal.hpp"
#include "exconf/distributions.hpp"
#include "exconf/stats.hpp"

namespace exconf::sim {

const char* to_string(NoiseKind k) {
  return k == NoiseKind::gaussian ? "gaussian" : "student_t";
}

double noise_df(double x1) {
  return 7.0 / (1.0 + std::exp(4.0 * x1 + 1.2)) + 3.0;
}

double scale_sigma(double x1, double x2) {
  constexpr double rho = 0.9;
  constexpr double one_minus_r2 = 1.0 - rho * rho;
  const double norm =
      1.0 / (2.0 * std::numbers::pi * std::sqrt(one_minus_r2));
  const double q =
      (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (2.0 * one_minus_r2);
  return 1.0 + 6.0 * norm * std::exp(-q);
}

double noise_quantile(double level, NoiseKind kind, double x1) {
  if (kind == NoiseKind::gaussian) return normal_quantile(level);
  return student_t_quantile(level, noise_df(x1));
}

double conditional_cdf(double y, NoiseKind kind, double x1, double x2) {
  if (std::isinf(y)) return y > 0 ? 1.0 : 0.0;
  const double z = y / scale_sigma(x1, x2);
  if (kind == NoiseKind::gaussian) return normal_cdf(z);
  return student_t_cdf(z, noise_df(x1));
}

double true_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double level,
                     NoiseKind kind) {
  return scale_sigma(x[0], x[1]) * noise_quantile(level, kind, x[0]);
}

DataSet gen_data(Index n, NoiseKind kind, Rng& rng) {
  if (n < 1) throw Error("gen_data: n must be positive");
  DataSet out;
  out.x.resize(n, kCovariateDim);
  out.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < kCovariateDim; ++j)
      out.x(i, j) = rng.uniform(-1.0, 1.0);
    const double eps = noise_quantile(rng.uniform01(), kind, out.x(i, 0));
    out.y[i] = scale_sigma(out.x(i, 0), out.x(i, 1)) * eps;
  }
  return out;
}

Eigen::MatrixXd low_discrepancy_grid(Index n, int dim) {
  if (n < 1 || dim < 1) throw Error("low_discrepancy_grid: bad size");
  // Root of x^(dim+1) = x + 1, the generalized golden ratio.
  double phi = 1.3;
  for (int it = 0; it < 64; ++it) {
    const double f = std::pow(phi, dim + 1) - phi - 1.0;
    const double df = (dim + 1) * std::pow(phi, dim) - 1.0;
    phi -= f / df;
  }
  std::vector<double> alpha(static_cast<std::size_t>(dim));
  double p = 1.0;
  for (int j = 0; j < dim; ++j) {
    p /= phi;
    alpha[static_cast<std::size_t>(j)] = p;
  }
  Eigen::MatrixXd grid(n, dim);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) {
      const double v =
          0.5 + static_cast<double>(i + 1) * alpha[static_cast<std::size_t>(j)];
      grid(i, j) = 2.0 * (v - std::floor(v)) - 1.0;
    }
  }
  return grid;
}

double analytic_coverage(
    const std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>&
        upper_endpoint,
    NoiseKind kind, const Eigen::MatrixXd& grid) {
  if (grid.rows() == 0) throw Error("analytic_coverage: empty grid");
  double acc = 0.0;
  Eigen::VectorXd row(grid.cols());
  for (Index i = 0; i < grid.rows(); ++i) {
    row = grid.row(i);
    const double e = upper_endpoint(row);
    acc += std::isinf(e) ? (e > 0 ? 1.0 : 0.0)
                         : conditional_cdf(e, kind, row[0], row[1]);
  }
  return acc / static_cast<double>(grid.rows());
}

namespace {

RepetitionOutcome run_repetition(const SimScenario& s, int rep,
                                 const Eigen::VectorXd& grid_predictions,
                                 const Eigen::MatrixXd& grid,
                                 const ExternalPredictions* ext) {
  Rng rng(substream_seed(s.seed, static_cast<std::uint64_t>(rep)));
  const DataSet data = gen_data(s.n_cal, s.noise, rng);
  const std::uint64_t boot_seed = rng.next_u64();

  Eigen::VectorXd scores(s.n_cal);
  const double level = 1.0 - s.alpha;
  for (Index i = 0; i < s.n_cal; ++i) {
    const double pred = ext ? (*ext).calibration[static_cast<std::size_t>(rep)][i]
                            : true_quantile(data.x.row(i), level, s.noise);
    scores[i] = data.y[i] - pred;
  }

  RepetitionOutcome out;
  try {
    ExtremeOptions opts;
    opts.tau0 = s.tau0;
    opts.split = s.split;
    opts.bootstrap_reps = s.bootstrap_reps;
    opts.seed = boot_seed;
    const ConformalCorrection corr =
        s.method == Method::classical
            ? classical_correction(scores, s.alpha)
            : extreme_correction(scores, s.alpha, s.method, opts);
    out.q_hat = corr.q_hat;
    out.finite = corr.finite;
    if (corr.ci && corr.ci->status != CiStatus::ok)
      out.status = to_string(corr.ci->status);
    else if (s.method == Method::gpd_safeprofile && corr.ci &&
             corr.ci->method == CiMethod::bootstrap)
      out.status = "profile_undefined";  // fell back; endpoint is bootstrap's
  } catch (const DegenerateBootstrap&) {
    out.status = "degenerate_bootstrap";
  } catch (const Error&) {
    out.status = "fit_error";
  }

  if (std::isinf(out.q_hat)) {
    out.coverage = 1.0;  // trivial interval covers everything
  } else {
    double acc = 0.0;
    for (Index j = 0; j < grid.rows(); ++j)
      acc += conditional_cdf(grid_predictions[j] + out.q_hat, s.noise,
                             grid(j, 0), grid(j, 1));
    out.coverage = acc / static_cast<double>(grid.rows());
  }
  return out;
}

}  // namespace

CoverageReport run_cell(const SimScenario& s, int threads) {
  if (s.repetitions < 1) throw Error("run_cell: repetitions must be >= 1");
  if (s.n_cal < 100) throw Error("run_cell: n_cal must be >= 100");

  ExternalPredictions ext_storage;
  const ExternalPredictions* ext = nullptr;
  if (s.prediction_source == PredictionSource::external_file) {
    ext_storage = load_external_predictions(s.prediction_file, s);
    ext = &ext_storage;
  }

  const Eigen::MatrixXd grid = low_discrepancy_grid(s.test_grid_size);
  Eigen::VectorXd grid_pred(grid.rows());
  if (ext) {
    grid_pred = ext->test;
  } else {
    const double level = 1.0 - s.alpha;
    for (Index j = 0; j < grid.rows(); ++j)
      grid_pred[j] = true_quantile(grid.row(j), level, s.noise);
  }

  CoverageReport report;
  report.scenario = s;
  report.repetitions.resize(static_cast<std::size_t>(s.repetitions));

  const int nthreads = std::max(1, std::min(threads, s.repetitions));
  if (nthreads == 1) {
    for (int r = 0; r < s.repetitions; ++r)
      report.repetitions[static_cast<std::size_t>(r)] =
          run_repetition(s, r, grid_pred, grid, ext);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
      pool.emplace_back([&, t] {
        for (int r = t; r < s.repetitions; r += nthreads)
          report.repetitions[static_cast<std::size_t>(r)] =
              run_repetition(s, r, grid_pred, grid, ext);
      });
    }
    for (auto& th : pool) th.join();
  }

  Eigen::VectorXd cov(s.repetitions);
  int finite_count = 0;
  for (int r = 0; r < s.repetitions; ++r) {
    const auto& o = report.repetitions[static_cast<std::size_t>(r)];
    cov[r] = o.coverage;
    finite_count += o.finite ? 1 : 0;
    if (o.status != "ok") ++report.failure_counts[o.status];
  }
  report.mean_coverage = cov.mean();
  report.min_coverage = cov.minCoeff();
  report.max_coverage = cov.maxCoeff();
  report.q25_coverage = empirical_quantile(cov, 0.25);
  report.median_coverage = empirical_quantile(cov, 0.5);
  report.q75_coverage = empirical_quantile(cov, 0.75);
  report.finite_fraction =
      static_cast<double>(finite_count) / static_cast<double>(s.repetitions);
  return report;
}

std::vector<CoverageReport> run_study(const std::vector<SimScenario>& grid,
                                      int threads) {
  std::vector<CoverageReport> reports;
  reports.reserve(grid.size());
  for (const auto& s : grid) reports.push_back(run_cell(s, threads));
  return reports;
}

}  // namespace exconf::sim
