#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace exconf {

using Eigen::Index;
using Eigen::VectorXd;

/// Conformity scores: a finite, nonempty sample; order carries no meaning.
using ScoreSample = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Error taxonomy. Numerical failures derive from Error so callers can map
// them to exit codes in one place.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SupportViolation : Error { using Error::Error; };
struct TooFewExceedances : Error { using Error::Error; };
struct NonConvergence : Error { using Error::Error; };
struct NotExtrapolating : Error { using Error::Error; };
struct BelowThreshold : Error { using Error::Error; };
struct DegenerateBootstrap : Error { using Error::Error; };
struct InvertedPredictions : Error { using Error::Error; };
struct SidednessMismatch : Error { using Error::Error; };
struct DegenerateLevel : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Tail model
// ---------------------------------------------------------------------------

/// Scale/shape pair of a generalized Pareto tail. scale > 0; shape carries no
/// a-priori sign restriction.
struct GpdParams {
  double scale = 1.0;
  double shape = 0.0;
};

/// A GPD tail fitted above an empirical threshold: exceedance fraction
/// tail_prob = n_exceed / n_total, exceedances counted strictly above the
/// threshold.
struct TailModel {
  double threshold = 0.0;
  double tail_prob = 0.0;
  GpdParams params;
  Index n_exceed = 0;
  Index n_total = 0;

  // Below 30 exceedances the MLE is highly unstable; below 5 it is refused.
  bool small_sample() const { return n_exceed < 30; }
};

// ---------------------------------------------------------------------------
// Quantile confidence intervals
// ---------------------------------------------------------------------------

enum class CiStatus { ok, profile_undefined, delta_unstable, degenerate_input };
enum class CiMethod { profile, bootstrap, delta };

struct CiRequest {
  VectorXd sample;
  double tau0 = 0.95;         // threshold level for the GPD fit
  double quantile_level = 0;  // 1 - alpha1; must exceed tau0
  double ci_level = 0;        // 1 - alpha2
  int bootstrap_reps = 1000;
  std::uint64_t seed = 0;
};

struct CiResult {
  double point_estimate = 0;
  double upper_endpoint = kInf;
  CiStatus status = CiStatus::ok;
  CiMethod method = CiMethod::profile;
};

// ---------------------------------------------------------------------------
// Conformal calibration
// ---------------------------------------------------------------------------

enum class SplitRule { bonferroni, sidak };

/// Miscoverage alpha split into (alpha1, alpha2) with
/// (1-alpha1)(1-alpha2) >= 1-alpha.
struct ConfidenceSpec {
  double alpha = 0;
  SplitRule split = SplitRule::sidak;
  double alpha1 = 0;
  double alpha2 = 0;
};

enum class Method {
  classical,
  gpd_simple,
  gpd_profile,
  gpd_bootstrap,
  gpd_delta,
  gpd_safeprofile,
};

enum class Sidedness { unilateral_upper, bilateral };

/// The calibrated additive correction q-hat. q_hat == +inf (finite == false)
/// encodes the degenerate trivial interval.
struct ConformalCorrection {
  double q_hat = kInf;
  Method method = Method::classical;
  bool finite = false;
  Sidedness sidedness = Sidedness::unilateral_upper;
  std::optional<TailModel> tail;  // GPD-backed methods
  std::optional<CiResult> ci;     // CI-backed methods
};

struct PredictionInterval {
  double lower = -kInf;
  double upper = kInf;
  Sidedness sidedness = Sidedness::unilateral_upper;
};

// ---------------------------------------------------------------------------
// Enum <-> string (CLI, artifacts, reports)
// ---------------------------------------------------------------------------

const char* to_string(Method m);
const char* to_string(CiStatus s);
const char* to_string(CiMethod m);
const char* to_string(SplitRule s);
const char* to_string(Sidedness s);

std::optional<Method> method_from_string(const std::string& name);
std::optional<SplitRule> split_from_string(const std::string& name);
std::optional<Sidedness> sidedness_from_string(const std::string& name);

}  // namespace exconf
