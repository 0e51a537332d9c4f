#pragma once

#include <utility>

#include <Eigen/Core>

#include "exconf/types.hpp"

namespace exconf {

/// |shape| below this switches density/quantile/survival to their
/// exponential-limit forms, which are the analytic shape->0 limits.
inline constexpr double kShapeZeroTol = 1e-6;

/// Fewer exceedances than this is a hard error; below TailModel's
/// small-sample bound (30) the fit is accepted with a warning flag.
inline constexpr Index kMinExceedances = 5;

/// Sum of GPD log-densities over exceedances (values above the threshold,
/// already shifted so the support starts at 0). Throws SupportViolation if a
/// point falls outside the support.
double gpd_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& exceedances,
                          const GpdParams& params);

/// Optimizer-friendly variant: -inf instead of throwing on support
/// violations or invalid parameters.
double gpd_log_likelihood_or_neg_inf(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances,
    const GpdParams& params) noexcept;

/// Probability-weighted-moment estimate; the start point for the MLE search.
GpdParams gpd_pwm_estimate(const Eigen::Ref<const Eigen::VectorXd>& exceedances);

/// Maximum-likelihood fit by Nelder-Mead on (log scale, shape), shape
/// searched in [-0.95, 2]. Throws TooFewExceedances / NonConvergence.
GpdParams fit_gpd_mle(const Eigen::Ref<const Eigen::VectorXd>& exceedances);

/// Empirical tau0-quantile threshold plus the strict exceedances shifted by
/// -threshold. Throws TooFewExceedances when fewer than kMinExceedances
/// values lie strictly above the threshold.
std::pair<double, VectorXd> select_threshold(
    const Eigen::Ref<const Eigen::VectorXd>& sample, double tau0);

/// select_threshold + fit_gpd_mle composed into a TailModel.
TailModel fit_tail_model(const Eigen::Ref<const Eigen::VectorXd>& sample,
                         double tau0);

/// Extrapolated quantile at `level` > 1 - tail_prob:
///   u + scale/shape * [((1-tau0)/(1-level))^shape - 1]
/// with the log-form limit at shape ~ 0. Throws NotExtrapolating below the
/// threshold level.
double gpd_tail_quantile(const TailModel& model, double level);

/// Tail survival P(S > y) for y >= threshold; inverse of gpd_tail_quantile
/// on its domain. Returns 0 beyond a finite upper endpoint (shape < 0).
double gpd_survival(const TailModel& model, double y);

/// d(quantile)/d(scale, shape) at fixed threshold and tail_prob; the delta
/// method's sensitivity vector.
Eigen::Vector2d gpd_quantile_gradient(const GpdParams& params,
                                      double tail_prob, double level);

/// Observed information: negative Hessian of the exceedance log-likelihood
/// at the given parameters.
Eigen::Matrix2d gpd_observed_information(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances,
    const GpdParams& params);

}  // namespace exconf
