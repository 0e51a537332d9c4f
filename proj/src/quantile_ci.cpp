#include "exconf/quantile_ci.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "exconf/distributions.hpp"
#include "exconf/gpd.hpp"
#include "exconf/rng.hpp"
#include "exconf/stats.hpp"

namespace exconf {

namespace {

constexpr double kShapeLo = -0.95;
constexpr double kShapeHi = 2.0;
constexpr double kConditionTol = 1e12;

struct BaseFit {
  TailModel model;
  VectorXd exceedances;
  double loglik_max = 0;
  double point = 0;
};

void validate_request(const CiRequest& req) {
  validate_sample(req.sample);
  if (!(req.tau0 > 0.0 && req.tau0 < 1.0))
    throw Error("ci request: tau0 must lie in (0,1)");
  if (!(req.quantile_level > req.tau0 && req.quantile_level < 1.0))
    throw Error("ci request: quantile_level must lie in (tau0, 1)");
  if (!(req.ci_level > 0.0 && req.ci_level < 1.0))
    throw Error("ci request: ci_level must lie in (0,1)");
}

BaseFit base_fit(const CiRequest& req) {
  validate_request(req);
  BaseFit out;
  auto [u, exc] = select_threshold(req.sample, req.tau0);
  out.exceedances = std::move(exc);
  out.model.threshold = u;
  out.model.n_exceed = out.exceedances.size();
  out.model.n_total = req.sample.size();
  out.model.tail_prob = static_cast<double>(out.model.n_exceed) /
                        static_cast<double>(out.model.n_total);
  out.model.params = fit_gpd_mle(out.exceedances);
  out.loglik_max =
      gpd_log_likelihood_or_neg_inf(out.exceedances, out.model.params);
  out.point = gpd_tail_quantile(out.model, req.quantile_level);
  return out;
}

// Scale implied by (quantile_value, shape) through the tail-quantile
// equation; positive for any quantile_value above the threshold.
inline double scale_given_quantile(double excess, double a, double xi) {
  if (std::abs(xi) < kShapeZeroTol) return excess / a;
  return xi * excess / std::expm1(xi * a);
}

}  // namespace

double profile_log_likelihood(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances, double threshold,
    double tail_prob, double level, double quantile_value,
    double* best_shape) {
  const double excess = quantile_value - threshold;
  if (!(excess > 0.0)) return -kInf;
  const double a = std::log(tail_prob / (1.0 - level));

  const auto ll_at = [&](double xi) {
    return gpd_log_likelihood_or_neg_inf(
        exceedances, {scale_given_quantile(excess, a, xi), xi});
  };

  // Coarse scan over the shape box, then golden-section refinement around
  // the best cell. The likelihood in shape is well-behaved but can be -inf
  // over part of the box (support), so the scan does the bracketing.
  constexpr int kGrid = 49;
  double best_xi = 0.0;
  double best_ll = -kInf;
  const double h = (kShapeHi - kShapeLo) / (kGrid - 1);
  for (int i = 0; i < kGrid; ++i) {
    const double xi = kShapeLo + h * i;
    const double ll = ll_at(xi);
    if (ll > best_ll) {
      best_ll = ll;
      best_xi = xi;
    }
  }
  if (best_ll == -kInf) {
    if (best_shape) *best_shape = std::numeric_limits<double>::quiet_NaN();
    return -kInf;
  }

  double lo = std::max(kShapeLo, best_xi - h);
  double hi = std::min(kShapeHi, best_xi + h);
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = ll_at(x1);
  double f2 = ll_at(x2);
  for (int it = 0; it < 48; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = ll_at(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = ll_at(x1);
    }
  }
  const double xi_star = f1 > f2 ? x1 : x2;
  const double ll_star = std::max({f1, f2, best_ll});
  if (best_shape) *best_shape = xi_star;
  return ll_star;
}

CiResult ci_profile_upper(const CiRequest& req) {
  const BaseFit bf = base_fit(req);
  CiResult res;
  res.method = CiMethod::profile;
  res.point_estimate = bf.point;

  const auto prof = [&](double q) {
    return profile_log_likelihood(bf.exceedances, bf.model.threshold,
                                  bf.model.tail_prob, req.quantile_level, q);
  };
  // The 1-D profile maximizer at the point estimate can slightly beat the
  // 2-D simplex optimum; use whichever is larger so the deviance is >= 0.
  const double ll_max = std::max(bf.loglik_max, prof(bf.point));
  const double crit = chi_squared_quantile(req.ci_level, 1.0);
  const auto deviance = [&](double q) { return 2.0 * (ll_max - prof(q)); };

  const double iqr = interquartile_range(req.sample);
  const double unit = std::max({iqr, 1e-8 * std::max(1.0, std::abs(bf.point))});
  const double base =
      std::max({0.05 * unit, 0.05 * (bf.point - bf.model.threshold)});
  const double bound = 1e6 * unit;

  // Geometric scan: find the last offset where the deviance is on or below
  // the chi-square line and the first one after it that is above.
  double lo = bf.point;
  double hi = std::numeric_limits<double>::quiet_NaN();
  bool crossed = false;
  for (double d = base; d <= bound; d *= 2.0) {
    const double q = bf.point + d;
    if (deviance(q) <= crit) {
      lo = q;
      crossed = false;
    } else if (!crossed) {
      hi = q;
      crossed = true;
    }
  }
  if (!crossed) {
    res.status = CiStatus::profile_undefined;
    res.upper_endpoint = kInf;
    return res;
  }

  for (int it = 0; it < 200 && (hi - lo) > 1e-10 * std::max(1.0, std::abs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deviance(mid) <= crit)
      lo = mid;
    else
      hi = mid;
  }
  res.upper_endpoint = lo;
  res.status = CiStatus::ok;
  return res;
}

CiResult ci_bootstrap_upper(const CiRequest& req) {
  if (req.bootstrap_reps < 200)
    throw Error("ci_bootstrap_upper: need at least 200 bootstrap replicates");
  const BaseFit bf = base_fit(req);
  CiResult res;
  res.method = CiMethod::bootstrap;
  res.point_estimate = bf.point;

  const auto n = req.sample.size();
  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(req.bootstrap_reps));
  int failures = 0;
  VectorXd resample(n);
  for (int r = 0; r < req.bootstrap_reps; ++r) {
    Rng rng(substream_seed(req.seed, static_cast<std::uint64_t>(r)));
    for (Index i = 0; i < n; ++i)
      resample[i] = req.sample[static_cast<Index>(rng.below(
          static_cast<std::uint64_t>(n)))];
    try {
      const TailModel tm = fit_tail_model(resample, req.tau0);
      estimates.push_back(gpd_tail_quantile(tm, req.quantile_level));
    } catch (const Error&) {
      ++failures;
    }
  }
  if (failures * 2 > req.bootstrap_reps)
    throw DegenerateBootstrap("more than half of the bootstrap refits failed");

  Eigen::Map<const VectorXd> est(estimates.data(),
                                 static_cast<Index>(estimates.size()));
  const double percentile =
      empirical_quantile(est, 0.5 * (1.0 + req.ci_level));
  // The CI upper endpoint contract requires upper >= point estimate; a
  // skewed resample distribution can place the percentile just below it.
  res.upper_endpoint = std::max(percentile, bf.point);
  res.status = CiStatus::ok;
  return res;
}

CiResult delta_upper_from_info(double point_estimate,
                               const Eigen::Vector2d& gradient,
                               const Eigen::Matrix2d& info, double ci_level) {
  CiResult res;
  res.method = CiMethod::delta;
  res.point_estimate = point_estimate;
  res.upper_endpoint = kInf;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(info);
  const double lmin = es.eigenvalues()[0];
  const double lmax = es.eigenvalues()[1];
  if (!(lmin > 0.0) || !std::isfinite(lmax) || lmax > kConditionTol * lmin) {
    res.status = CiStatus::delta_unstable;
    return res;
  }
  const Eigen::Vector2d w = es.eigenvectors().transpose() * gradient;
  const double variance =
      w[0] * w[0] / lmin + w[1] * w[1] / lmax;
  if (!(variance >= 0.0) || !std::isfinite(variance)) {
    res.status = CiStatus::delta_unstable;
    return res;
  }
  const double z = normal_quantile(0.5 * (1.0 + ci_level));
  res.upper_endpoint = point_estimate + z * std::sqrt(variance);
  res.status = CiStatus::ok;
  return res;
}

CiResult ci_delta_upper(const CiRequest& req) {
  const BaseFit bf = base_fit(req);
  const Eigen::Vector2d grad = gpd_quantile_gradient(
      bf.model.params, bf.model.tail_prob, req.quantile_level);
  Eigen::Matrix2d info;
  try {
    info = gpd_observed_information(bf.exceedances, bf.model.params);
  } catch (const SupportViolation&) {
    CiResult res;
    res.method = CiMethod::delta;
    res.point_estimate = bf.point;
    res.status = CiStatus::delta_unstable;
    return res;
  }
  if (!info.allFinite()) {
    CiResult res;
    res.method = CiMethod::delta;
    res.point_estimate = bf.point;
    res.status = CiStatus::delta_unstable;
    return res;
  }
  return delta_upper_from_info(bf.point, grad, info, req.ci_level);
}

}  // namespace exconf
