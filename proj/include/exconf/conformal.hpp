#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Core>

#include "exconf/types.hpp"

namespace exconf {

/// Unilateral conformity score: observed - prediction.
double score_unilateral(double prediction, double observed);

/// Bilateral conformity score: max of the two one-sided deficits. Throws
/// InvertedPredictions when lower_pred > upper_pred.
double score_bilateral(double lower_pred, double upper_pred, double observed);

/// Split alpha into (alpha1, alpha2). Bonferroni halves; Sidak solves
/// (1-alpha1)(1-alpha2) = 1-alpha with alpha1 = alpha2.
ConfidenceSpec split_levels(double alpha, SplitRule split);

/// Classical split-conformal correction: the order statistic at
/// ceil((n+1)(1-alpha)), or +inf when that index exceeds n (the degenerate
/// regime alpha < 1/(n+1)).
ConformalCorrection classical_correction(
    const Eigen::Ref<const Eigen::VectorXd>& scores, double alpha,
    Sidedness sidedness = Sidedness::unilateral_upper);

struct ExtremeOptions {
  double tau0 = 0.95;
  SplitRule split = SplitRule::sidak;
  int bootstrap_reps = 1000;
  std::uint64_t seed = 20240101;
  Sidedness sidedness = Sidedness::unilateral_upper;
};

/// GPD-based correction per `method`. For 1-alpha <= tau0 every method
/// delegates to classical_correction (the GPD approach coincides with the
/// classical one below the threshold level).
ConformalCorrection extreme_correction(
    const Eigen::Ref<const Eigen::VectorXd>& scores, double alpha,
    Method method, const ExtremeOptions& opts = {});

/// Unilateral interval (y_min, prediction + q_hat].
PredictionInterval build_interval(double prediction,
                                  const ConformalCorrection& correction,
                                  double y_min = -kInf);

/// Bilateral interval [lower_pred - q_hat, upper_pred + q_hat].
PredictionInterval build_interval(double lower_pred, double upper_pred,
                                  const ConformalCorrection& correction);

/// Beta(n+1-l, l) parameters of the conditional-coverage law, l = floor((n+1)alpha).
/// Throws DegenerateLevel when l falls outside [1, n].
std::pair<long, long> coverage_beta_params(long n_c, double alpha);

}  // namespace exconf
