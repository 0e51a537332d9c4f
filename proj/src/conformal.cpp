#include "exconf/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "exconf/gpd.hpp"
#include "exconf/quantile_ci.hpp"
#include "exconf/stats.hpp"

namespace exconf {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error("alpha must lie in (0,1)");
}

}  // namespace

double score_unilateral(double prediction, double observed) {
  if (!std::isfinite(prediction) || !std::isfinite(observed))
    throw Error("score_unilateral: inputs must be finite");
  return observed - prediction;
}

double score_bilateral(double lower_pred, double upper_pred, double observed) {
  if (!std::isfinite(lower_pred) || !std::isfinite(upper_pred) ||
      !std::isfinite(observed))
    throw Error("score_bilateral: inputs must be finite");
  if (lower_pred > upper_pred)
    throw InvertedPredictions("lower prediction exceeds upper prediction");
  return std::max(lower_pred - observed, observed - upper_pred);
}

ConfidenceSpec split_levels(double alpha, SplitRule split) {
  check_alpha(alpha);
  ConfidenceSpec spec;
  spec.alpha = alpha;
  spec.split = split;
  if (split == SplitRule::bonferroni) {
    spec.alpha1 = spec.alpha2 = 0.5 * alpha;
  } else {
    // 1 - sqrt(1-alpha), computed so (1-a1)^2 == 1-alpha to the last ulp
    const double a1 = -std::expm1(0.5 * std::log1p(-alpha));
    spec.alpha1 = spec.alpha2 = a1;
  }
  return spec;
}

ConformalCorrection classical_correction(
    const Eigen::Ref<const Eigen::VectorXd>& scores, double alpha,
    Sidedness sidedness) {
  validate_sample(scores);
  check_alpha(alpha);
  const auto n = scores.size();
  const double m = static_cast<double>(n + 1) * (1.0 - alpha);
  const auto k =
      std::max<Index>(1, static_cast<Index>(std::ceil(m - 1e-9)));

  ConformalCorrection corr;
  corr.method = Method::classical;
  corr.sidedness = sidedness;
  if (k > n) {  // alpha < 1/(n+1): the quantile is ill-defined
    corr.q_hat = kInf;
    corr.finite = false;
    return corr;
  }
  std::vector<double> v(scores.data(), scores.data() + n);
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  corr.q_hat = v[static_cast<std::size_t>(k - 1)];
  corr.finite = true;
  return corr;
}

ConformalCorrection extreme_correction(
    const Eigen::Ref<const Eigen::VectorXd>& scores, double alpha,
    Method method, const ExtremeOptions& opts) {
  validate_sample(scores);
  check_alpha(alpha);
  if (!(opts.tau0 > 0.0 && opts.tau0 < 1.0))
    throw Error("extreme_correction: tau0 must lie in (0,1)");

  // Below the threshold level the GPD approach coincides with the classical
  // one; delegate and report what was actually computed.
  if (method == Method::classical || 1.0 - alpha <= opts.tau0 + 1e-12)
    return classical_correction(scores, alpha, opts.sidedness);

  ConformalCorrection corr;
  corr.method = method;
  corr.sidedness = opts.sidedness;
  corr.tail = fit_tail_model(scores, opts.tau0);

  if (method == Method::gpd_simple) {
    corr.q_hat = gpd_tail_quantile(*corr.tail, 1.0 - alpha);
    corr.finite = std::isfinite(corr.q_hat);
    return corr;
  }

  const ConfidenceSpec spec = split_levels(alpha, opts.split);
  CiRequest req;
  req.sample = scores;
  req.tau0 = opts.tau0;
  req.quantile_level = 1.0 - spec.alpha1;
  req.ci_level = 1.0 - spec.alpha2;
  req.bootstrap_reps = opts.bootstrap_reps;
  req.seed = opts.seed;

  CiResult ci;
  switch (method) {
    case Method::gpd_profile:
      ci = ci_profile_upper(req);
      break;
    case Method::gpd_bootstrap:
      ci = ci_bootstrap_upper(req);
      break;
    case Method::gpd_delta:
      ci = ci_delta_upper(req);
      break;
    case Method::gpd_safeprofile: {
      ci = ci_profile_upper(req);
      if (ci.status != CiStatus::ok || !std::isfinite(ci.upper_endpoint)) {
        const CiResult fallback = ci_bootstrap_upper(req);
        ci = fallback;
      }
      break;
    }
    default:
      throw Error("extreme_correction: unsupported method");
  }
  corr.ci = ci;
  corr.q_hat = ci.upper_endpoint;
  corr.finite = std::isfinite(corr.q_hat);
  return corr;
}

PredictionInterval build_interval(double prediction,
                                  const ConformalCorrection& correction,
                                  double y_min) {
  if (correction.sidedness != Sidedness::unilateral_upper)
    throw SidednessMismatch(
        "correction was calibrated for bilateral predictions");
  if (!std::isfinite(prediction))
    throw Error("build_interval: prediction must be finite");
  return {y_min, prediction + correction.q_hat, Sidedness::unilateral_upper};
}

PredictionInterval build_interval(double lower_pred, double upper_pred,
                                  const ConformalCorrection& correction) {
  if (correction.sidedness != Sidedness::bilateral)
    throw SidednessMismatch(
        "correction was calibrated for unilateral predictions");
  if (!std::isfinite(lower_pred) || !std::isfinite(upper_pred))
    throw Error("build_interval: predictions must be finite");
  if (lower_pred > upper_pred)
    throw InvertedPredictions("lower prediction exceeds upper prediction");
  double lo = lower_pred - correction.q_hat;
  double hi = upper_pred + correction.q_hat;
  if (lo > hi) {
    // a correction below -(width/2) empties the conformal set; collapse to
    // the zero-width interval at the band center
    lo = hi = 0.5 * (lower_pred + upper_pred);
  }
  return {lo, hi, Sidedness::bilateral};
}

std::pair<long, long> coverage_beta_params(long n_c, double alpha) {
  if (n_c < 1) throw Error("coverage_beta_params: n_c must be positive");
  check_alpha(alpha);
  const double m = static_cast<double>(n_c + 1) * alpha;
  const auto l = static_cast<long>(std::floor(m + 1e-9));
  if (l < 1)
    throw DegenerateLevel("alpha too small: floor((n+1) alpha) = 0");
  if (l > n_c)
    throw DegenerateLevel("alpha too large for a nondegenerate beta");
  return {n_c + 1 - l, l};
}

}  // namespace exconf
