#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "exconf/conformal.hpp"
#include "exconf/distributions.hpp"
#include "exconf/gpd.hpp"
#include "exconf/rng.hpp"

using namespace exconf;

namespace {

VectorXd gpd_sample(Index n, double sigma, double xi, Rng& rng) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = sigma * std::expm1(-xi * std::log1p(-rng.uniform01())) / xi;
  return v;
}

double ks_distance(std::vector<double> sample, double a, double b) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = beta_cdf(sample[i], a, b);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return d;
}

}  // namespace

TEST_CASE("conformity scores") {
  CHECK(score_unilateral(3.0, 5.0) == 2.0);
  CHECK(score_unilateral(5.0, 5.0) == 0.0);
  CHECK(score_unilateral(5.0, 3.0) == -2.0);

  CHECK(score_bilateral(1.0, 3.0, 2.0) == -1.0);
  CHECK(score_bilateral(1.0, 3.0, 5.0) == 2.0);
  CHECK(score_bilateral(1.0, 3.0, -4.0) == 5.0);
  CHECK_THROWS_AS(score_bilateral(3.0, 1.0, 2.0), InvertedPredictions);
}

TEST_CASE("level splitting") {
  const ConfidenceSpec bon = split_levels(1e-4, SplitRule::bonferroni);
  CHECK(bon.alpha1 == 5e-5);
  CHECK(bon.alpha2 == 5e-5);
  CHECK((1.0 - bon.alpha1) * (1.0 - bon.alpha2) >= 1.0 - bon.alpha);

  const ConfidenceSpec sid = split_levels(1e-4, SplitRule::sidak);
  CHECK(sid.alpha1 == doctest::Approx(5.000125006250390e-05).epsilon(1e-12));
  for (double alpha : {0.2, 1e-3, 1e-4, 3.1622776601683795e-05, 1e-5}) {
    const ConfidenceSpec s = split_levels(alpha, SplitRule::sidak);
    // construction identity, exact by design
    CHECK(std::abs((1.0 - s.alpha1) * (1.0 - s.alpha2) - (1.0 - alpha)) < 1e-14);
    const ConfidenceSpec c = split_levels(alpha, SplitRule::bonferroni);
    CHECK((1.0 - c.alpha1) * (1.0 - c.alpha2) >= 1.0 - alpha);
  }
}

TEST_CASE("classical correction order statistics") {
  const VectorXd scores = VectorXd::LinSpaced(100, 1.0, 100.0);
  const ConformalCorrection a = classical_correction(scores, 0.1);
  CHECK(a.finite);
  CHECK(a.q_hat == 91.0);  // s_(ceil(101 * 0.9)) = s_(91)

  const ConformalCorrection b = classical_correction(scores, 0.005);
  CHECK_FALSE(b.finite);
  CHECK(b.q_hat == kInf);

  const ConformalCorrection c = classical_correction(scores, 1.0 / 101.0);
  CHECK(c.finite);
  CHECK(c.q_hat == 100.0);  // boundary: index lands exactly on the maximum

  // alpha within float noise of 1: the index clamps to the minimum score
  const ConformalCorrection d = classical_correction(scores, 1.0 - 1e-12);
  CHECK(d.finite);
  CHECK(d.q_hat == 1.0);
}

TEST_CASE("classical correction is infinite exactly below 1/(n+1)") {
  Rng rng(5150);
  for (long n : {10L, 99L, 100L, 999L, 1000L}) {
    VectorXd scores(n);
    for (Index i = 0; i < n; ++i) scores[i] = rng.uniform01();
    const double boundary = 1.0 / static_cast<double>(n + 1);
    for (double alpha :
         {boundary * 0.5, boundary * 0.999, boundary, boundary * 1.001, 0.1}) {
      const ConformalCorrection c = classical_correction(scores, alpha);
      CHECK(c.finite == !(alpha < boundary));
    }
  }
}

TEST_CASE("extreme correction: exponential oracle for gpd_simple") {
  Rng rng(606);
  VectorXd scores(10000);
  for (Index i = 0; i < scores.size(); ++i)
    scores[i] = -std::log1p(-rng.uniform01());
  const ConformalCorrection c =
      extreme_correction(scores, 1e-3, Method::gpd_simple);
  CHECK(c.finite);
  // true unit-exponential 0.999-quantile is ln(1000)
  CHECK(std::abs(c.q_hat - std::log(1000.0)) < 0.3);
  REQUIRE(c.tail.has_value());
  CHECK(c.tail->n_exceed == 500);
  CHECK_FALSE(c.ci.has_value());
}

TEST_CASE("safeprofile passes through when the profile endpoint exists") {
  Rng rng(1234);
  const VectorXd scores = gpd_sample(2000, 1.0, 0.4, rng);
  ExtremeOptions opts;
  opts.seed = 99;
  const ConformalCorrection p =
      extreme_correction(scores, 1e-3, Method::gpd_profile, opts);
  const ConformalCorrection s =
      extreme_correction(scores, 1e-3, Method::gpd_safeprofile, opts);
  REQUIRE(p.ci.has_value());
  REQUIRE(p.ci->status == CiStatus::ok);
  CHECK(p.q_hat == s.q_hat);
  CHECK(s.ci->method == CiMethod::profile);
}

TEST_CASE("CI corrections dominate the point estimate at their level") {
  Rng rng(888);
  const VectorXd scores = gpd_sample(4000, 1.0, 0.3, rng);
  const double alpha = 1e-3;
  const ConfidenceSpec spec = split_levels(alpha, SplitRule::sidak);
  ExtremeOptions opts;
  opts.seed = 5;
  for (Method m :
       {Method::gpd_profile, Method::gpd_bootstrap, Method::gpd_delta}) {
    const ConformalCorrection c = extreme_correction(scores, alpha, m, opts);
    REQUIRE(c.ci.has_value());
    REQUIRE(c.ci->status == CiStatus::ok);
    REQUIRE(c.tail.has_value());
    const double point = gpd_tail_quantile(*c.tail, 1.0 - spec.alpha1);
    CHECK(c.q_hat >= point - 1e-12);
  }
}

TEST_CASE("below the threshold level every method is classical") {
  Rng rng(11);
  VectorXd scores(1000);
  for (Index i = 0; i < scores.size(); ++i) scores[i] = rng.uniform01();
  const ConformalCorrection ref = classical_correction(scores, 0.1);
  for (Method m : {Method::gpd_simple, Method::gpd_profile,
                   Method::gpd_bootstrap, Method::gpd_delta,
                   Method::gpd_safeprofile}) {
    const ConformalCorrection c = extreme_correction(scores, 0.1, m);
    CHECK(c.method == Method::classical);
    CHECK(c.q_hat == ref.q_hat);
    CHECK_FALSE(c.tail.has_value());
  }
  // boundary: 1 - alpha == tau0 also delegates
  const ConformalCorrection b =
      extreme_correction(scores, 0.05, Method::gpd_simple);
  CHECK(b.method == Method::classical);
}

TEST_CASE("interval construction") {
  ConformalCorrection uni;
  uni.q_hat = 2.0;
  uni.finite = true;
  uni.sidedness = Sidedness::unilateral_upper;
  const PredictionInterval a = build_interval(10.0, uni);
  CHECK(a.lower == -kInf);
  CHECK(a.upper == 12.0);
  const PredictionInterval a2 = build_interval(10.0, uni, 0.0);
  CHECK(a2.lower == 0.0);

  ConformalCorrection bi;
  bi.q_hat = -0.5;
  bi.finite = true;
  bi.sidedness = Sidedness::bilateral;
  const PredictionInterval b = build_interval(1.0, 3.0, bi);
  CHECK(b.lower == 1.5);  // negative correction narrows the band
  CHECK(b.upper == 2.5);

  ConformalCorrection inf_corr;
  inf_corr.q_hat = kInf;
  inf_corr.finite = false;
  inf_corr.sidedness = Sidedness::unilateral_upper;
  const PredictionInterval c = build_interval(10.0, inf_corr);
  CHECK(c.lower == -kInf);
  CHECK(c.upper == kInf);

  CHECK_THROWS_AS(build_interval(1.0, 3.0, uni), SidednessMismatch);
  CHECK_THROWS_AS(build_interval(10.0, bi), SidednessMismatch);
  CHECK_THROWS_AS(build_interval(3.0, 1.0, bi), InvertedPredictions);

  ConformalCorrection empty_corr = bi;
  empty_corr.q_hat = -2.0;  // below -(width/2): conformal set is empty
  const PredictionInterval e = build_interval(1.0, 3.0, empty_corr);
  CHECK(e.lower == e.upper);
  CHECK(e.lower == 2.0);
}

TEST_CASE("coverage beta parameters") {
  CHECK(coverage_beta_params(100, 0.1) == std::pair<long, long>(91, 10));
  CHECK_THROWS_AS(coverage_beta_params(100, 0.005), DegenerateLevel);
  // Eq.-(3) oracle: l = floor(1000 * 0.01) = 10
  CHECK(coverage_beta_params(999, 0.01) == std::pair<long, long>(990, 10));
}

TEST_CASE("exchangeability and the beta coverage law") {
  // 5000 trials, n_c = 99, alpha = 0.1, uniform scores: the conditional
  // coverage of the classical interval is q-hat itself
  const int trials = 5000;
  const Index n_c = 99;
  int marginal_hits = 0;
  std::vector<double> conditional;
  conditional.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    Rng rng(substream_seed(424242, static_cast<std::uint64_t>(t)));
    VectorXd scores(n_c);
    for (Index i = 0; i < n_c; ++i) scores[i] = rng.uniform01();
    const double s_test = rng.uniform01();
    const ConformalCorrection c = classical_correction(scores, 0.1);
    REQUIRE(c.finite);
    if (s_test <= c.q_hat) ++marginal_hits;
    conditional.push_back(c.q_hat);
  }
  const double marginal = static_cast<double>(marginal_hits) / trials;
  CHECK(std::abs(marginal - 0.9) <= 0.01);
  CHECK(ks_distance(conditional, 91.0, 10.0) < 0.03);
}

TEST_CASE("proposition 1 at desk scale") {
  // GPD(1, 0.5) scores; true 0.999-quantile is 2 (0.001^-0.5 - 1)
  const double truth = 2.0 * (std::pow(0.001, -0.5) - 1.0);
  const int reps = 500;
  int cover = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng(substream_seed(2101, static_cast<std::uint64_t>(r)));
    const VectorXd scores = gpd_sample(1000, 1.0, 0.5, rng);
    ExtremeOptions opts;
    opts.bootstrap_reps = 300;
    opts.seed = substream_seed(2102, static_cast<std::uint64_t>(r));
    const ConformalCorrection c =
        extreme_correction(scores, 1e-3, Method::gpd_safeprofile, opts);
    if (c.q_hat >= truth) ++cover;
  }
  CHECK(static_cast<double>(cover) / reps >= 0.95);
}

TEST_CASE("translation invariance of every method") {
  Rng rng(3434);
  const Index n = 2000;
  VectorXd preds(n), obs(n);
  for (Index i = 0; i < n; ++i) {
    preds[i] = rng.uniform(-2.0, 2.0);
    obs[i] = preds[i] + gpd_sample(1, 1.0, 0.3, rng)[0] - 1.0;
  }
  const double shift = 3.7;
  const double test_pred = 0.42;
  for (Method m : {Method::classical, Method::gpd_simple, Method::gpd_profile,
                   Method::gpd_bootstrap, Method::gpd_delta,
                   Method::gpd_safeprofile}) {
    VectorXd scores(n), shifted(n);
    for (Index i = 0; i < n; ++i) {
      scores[i] = score_unilateral(preds[i], obs[i]);
      shifted[i] = score_unilateral(preds[i] + shift, obs[i]);
    }
    ExtremeOptions opts;
    opts.seed = 31337;
    const double alpha = 1e-3;
    const ConformalCorrection c0 =
        m == Method::classical ? classical_correction(scores, alpha)
                               : extreme_correction(scores, alpha, m, opts);
    const ConformalCorrection c1 =
        m == Method::classical ? classical_correction(shifted, alpha)
                               : extreme_correction(shifted, alpha, m, opts);
    const PredictionInterval i0 = build_interval(test_pred, c0);
    const PredictionInterval i1 = build_interval(test_pred + shift, c1);
    CHECK(std::abs(i0.upper - i1.upper) < 1e-9);
  }
}
