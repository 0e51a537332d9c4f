#pragma once

#include <Eigen/Core>

#include "exconf/types.hpp"

namespace exconf {

/// Upper endpoint of the profile-likelihood confidence interval for the
/// extrapolated score quantile: the largest q with
///   2 * (loglik_max - profile_loglik(q)) <= chi2_1(ci_level),
/// found by a geometric scan from the point estimate followed by bisection.
/// status = profile_undefined when the deviance never recrosses the
/// chi-square line within 1e6 x IQR of the sample.
CiResult ci_profile_upper(const CiRequest& req);

/// Nonparametric percentile bootstrap: resample the full sample with
/// replacement, re-select the threshold and refit per resample, take the
/// empirical (1 - alpha2/2)-percentile of the quantile estimates.
/// Deterministic given req.seed; resample r draws from substream (seed, r).
/// Throws DegenerateBootstrap when more than half the resample fits fail.
CiResult ci_bootstrap_upper(const CiRequest& req);

/// Delta-method upper endpoint: point + z(1 - alpha2/2) * se with
/// se^2 = grad^T I^{-1} grad, I the observed information (numerical Hessian
/// of the exceedance log-likelihood at the MLE). status = delta_unstable
/// when I is numerically singular.
CiResult ci_delta_upper(const CiRequest& req);

/// Exceedance log-likelihood profiled over shape at a fixed quantile value:
/// scale is eliminated by solving the tail-quantile equation for scale given
/// q. Returns -inf when no shape in the search box yields a valid model.
double profile_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& exceedances,
                              double threshold, double tail_prob, double level,
                              double quantile_value,
                              double* best_shape = nullptr);

/// Final delta-method step, separated so the singularity contract is
/// directly testable with a crafted information matrix.
CiResult delta_upper_from_info(double point_estimate,
                               const Eigen::Vector2d& gradient,
                               const Eigen::Matrix2d& info, double ci_level);

}  // namespace exconf
