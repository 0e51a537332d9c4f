#include "exconf/gpd.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "exconf/stats.hpp"

namespace exconf {

namespace {

// Gradient and Hessian of the exceedance log-likelihood in (scale, shape).
// Valid away from shape = 0 and for points strictly inside the support.
void likelihood_derivatives(const Eigen::Ref<const Eigen::VectorXd>& y,
                            double sigma, double xi, Eigen::Vector2d& grad,
                            Eigen::Matrix2d& hess) {
  const auto n = static_cast<double>(y.size());
  const Eigen::ArrayXd t = 1.0 + (xi / sigma) * y.array();
  const double s1 = t.log().sum();
  const double s2 = (y.array() / t).sum();
  const double s3 = (y.array() / t).square().sum();
  const double s_2 = sigma * sigma;
  const double s_3 = s_2 * sigma;
  grad[0] = -n / sigma + (1.0 + xi) / s_2 * s2;
  grad[1] = s1 / (xi * xi) - (1.0 / xi + 1.0) * s2 / sigma;
  hess(0, 0) = n / s_2 + (1.0 + xi) * (-2.0 * s2 / s_3 + xi * s3 / (s_2 * s_2));
  hess(0, 1) = hess(1, 0) = s2 / s_2 - (1.0 + xi) * s3 / s_3;
  hess(1, 1) = 2.0 * s2 / (sigma * xi * xi) - 2.0 * s1 / (xi * xi * xi) +
               (1.0 + 1.0 / xi) * s3 / s_2;
}

// Drives the simplex optimum to gradient-level precision; the quantile map
// amplifies parameter noise, so the fit must be sharper than the simplex
// termination tolerance alone provides.
GpdParams newton_polish(const Eigen::Ref<const Eigen::VectorXd>& y,
                        GpdParams p) {
  if (std::abs(p.shape) < 1e-5) return p;
  double ll = gpd_log_likelihood_or_neg_inf(y, p);
  for (int it = 0; it < 10; ++it) {
    Eigen::Vector2d grad;
    Eigen::Matrix2d hess;
    likelihood_derivatives(y, p.scale, p.shape, grad, hess);
    const double det = hess(0, 0) * hess(1, 1) - hess(0, 1) * hess(1, 0);
    if (!std::isfinite(det) || det == 0.0) break;
    Eigen::Vector2d step;
    step[0] = -(hess(1, 1) * grad[0] - hess(0, 1) * grad[1]) / det;
    step[1] = -(hess(0, 0) * grad[1] - hess(1, 0) * grad[0]) / det;
    if (!step.allFinite()) break;

    GpdParams cand = p;
    bool accepted = false;
    double lam = 1.0;
    for (int h = 0; h < 12; ++h, lam *= 0.5) {
      cand.scale = p.scale + lam * step[0];
      cand.shape = std::clamp(p.shape + lam * step[1], -0.95, 2.0);
      if (!(cand.scale > 0.0)) continue;
      const double cand_ll = gpd_log_likelihood_or_neg_inf(y, cand);
      if (cand_ll >= ll - 1e-12) {
        ll = std::max(ll, cand_ll);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double moved = std::max(std::abs(cand.scale - p.scale) / p.scale,
                                  std::abs(cand.shape - p.shape));
    p = cand;
    if (moved < 1e-13 || std::abs(p.shape) < 1e-5) break;
  }
  return p;
}

struct NelderMead {
  Eigen::Vector2d best;
  double fbest = kInf;
  bool converged = false;
};

// Minimizes f over R^2; classic simplex moves. f may return +inf for
// infeasible points as long as the start point is feasible.
template <typename F>
NelderMead nelder_mead(const F& f, Eigen::Vector2d x0, Eigen::Vector2d step,
                       int max_iter, double ftol, double xtol) {
  std::array<Eigen::Vector2d, 3> xs = {
      x0, x0 + Eigen::Vector2d(step[0], 0.0), x0 + Eigen::Vector2d(0.0, step[1])};
  std::array<double, 3> fs = {f(xs[0]), f(xs[1]), f(xs[2])};

  auto order = [&] {
    std::array<int, 3> idx = {0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::array<Eigen::Vector2d, 3> nx = {xs[idx[0]], xs[idx[1]], xs[idx[2]]};
    std::array<double, 3> nf = {fs[idx[0]], fs[idx[1]], fs[idx[2]]};
    xs = nx;
    fs = nf;
  };

  NelderMead out;
  for (int it = 0; it < max_iter; ++it) {
    order();
    const double fspread = fs[2] - fs[0];
    const double xspread =
        std::max((xs[1] - xs[0]).cwiseAbs().maxCoeff(),
                 (xs[2] - xs[0]).cwiseAbs().maxCoeff());
    if (fspread < ftol * (std::abs(fs[0]) + ftol) && xspread < xtol) {
      out.converged = true;
      break;
    }

    const Eigen::Vector2d centroid = 0.5 * (xs[0] + xs[1]);
    const Eigen::Vector2d xr = centroid + (centroid - xs[2]);  // reflection
    const double fr = f(xr);
    if (fr < fs[0]) {
      const Eigen::Vector2d xe = centroid + 2.0 * (centroid - xs[2]);
      const double fe = f(xe);
      if (fe < fr) {
        xs[2] = xe;
        fs[2] = fe;
      } else {
        xs[2] = xr;
        fs[2] = fr;
      }
    } else if (fr < fs[1]) {
      xs[2] = xr;
      fs[2] = fr;
    } else {
      const Eigen::Vector2d xc =
          centroid + 0.5 * ((fr < fs[2] ? xr : xs[2]) - centroid);
      const double fc = f(xc);
      if (fc < std::min(fr, fs[2])) {
        xs[2] = xc;
        fs[2] = fc;
      } else {  // shrink toward the best vertex
        for (int i = 1; i < 3; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = f(xs[i]);
        }
      }
    }
  }
  order();
  out.best = xs[0];
  out.fbest = fs[0];
  return out;
}

}  // namespace

double gpd_log_likelihood_or_neg_inf(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances,
    const GpdParams& params) noexcept {
  const double sigma = params.scale;
  const double xi = params.shape;
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(xi))
    return -kInf;
  const auto y = exceedances.array();
  const auto n = static_cast<double>(exceedances.size());
  if (exceedances.size() == 0) return 0.0;
  if (y.minCoeff() < 0.0) return -kInf;
  if (std::abs(xi) < kShapeZeroTol) return -n * std::log(sigma) - y.sum() / sigma;
  const Eigen::ArrayXd t = 1.0 + (xi / sigma) * y;
  if (t.minCoeff() <= 0.0) return -kInf;
  return -n * std::log(sigma) - (1.0 / xi + 1.0) * t.log().sum();
}

double gpd_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& exceedances,
                          const GpdParams& params) {
  if (!(params.scale > 0.0) || !std::isfinite(params.scale) ||
      !std::isfinite(params.shape))
    throw Error("gpd_log_likelihood: invalid parameters");
  validate_sample(exceedances);
  const double ll = gpd_log_likelihood_or_neg_inf(exceedances, params);
  if (ll == -kInf)
    throw SupportViolation("exceedance outside the GPD support");
  return ll;
}

GpdParams gpd_pwm_estimate(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances) {
  const auto n = exceedances.size();
  std::vector<double> v(exceedances.data(), exceedances.data() + n);
  std::sort(v.begin(), v.end());
  const double b0 =
      std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double a1 = 0.0;  // estimates E[Y (1 - F(Y))]
  for (Index i = 0; i < n; ++i) {
    a1 += v[static_cast<std::size_t>(i)] * static_cast<double>(n - 1 - i) /
          static_cast<double>(n - 1);
  }
  a1 /= static_cast<double>(n);
  const double d = b0 - 2.0 * a1;
  if (!(d > 1e-300)) return {b0 > 0 ? b0 : 1.0, 0.1};
  // Hosking-Wallis with shape sign flipped to the heavy-tail convention.
  return {2.0 * b0 * a1 / d, 2.0 - b0 / d};
}

GpdParams fit_gpd_mle(const Eigen::Ref<const Eigen::VectorXd>& exceedances) {
  validate_sample(exceedances);
  const auto n = exceedances.size();
  if (n < kMinExceedances)
    throw TooFewExceedances("need at least 5 exceedances, got " +
                            std::to_string(n));
  const double ymin = exceedances.minCoeff();
  const double ymax = exceedances.maxCoeff();
  if (!(ymin > 0.0))
    throw Error("fit_gpd_mle: exceedances must be strictly positive");
  if (ymax - ymin <= 1e-12 * std::max(1.0, ymax))
    throw NonConvergence(
        "degenerate exceedance sample: likelihood unbounded toward the "
        "support boundary");

  GpdParams start = gpd_pwm_estimate(exceedances);
  double xi0 = std::clamp(start.shape, -0.5, 1.5);
  double sigma0 = std::max(start.scale, 1e-12 * ymax);
  if (xi0 < 0.0) sigma0 = std::max(sigma0, 1.05 * (-xi0) * ymax);

  const auto neg_ll = [&](const Eigen::Vector2d& t) -> double {
    const double xi = t[1];
    if (xi < -0.95 || xi > 2.0) return kInf;
    return -gpd_log_likelihood_or_neg_inf(exceedances,
                                          {std::exp(t[0]), xi});
  };

  Eigen::Vector2d x0(std::log(sigma0), xi0);
  for (int guard = 0; guard < 64 && !(neg_ll(x0) < kInf); ++guard)
    x0[0] += std::log(2.0);

  auto r1 = nelder_mead(neg_ll, x0, {0.4, 0.25}, 500, 1e-11, 1e-9);
  auto r2 = nelder_mead(neg_ll, r1.best, {0.05, 0.05}, 500, 1e-12, 1e-10);
  if (r2.fbest > r1.fbest) r2 = r1;
  if (!r2.converged && !r1.converged)
    throw NonConvergence("GPD likelihood maximization did not converge");
  return newton_polish(exceedances, {std::exp(r2.best[0]), r2.best[1]});
}

Eigen::Matrix2d gpd_observed_information(
    const Eigen::Ref<const Eigen::VectorXd>& exceedances,
    const GpdParams& params) {
  if (gpd_log_likelihood_or_neg_inf(exceedances, params) == -kInf)
    throw SupportViolation("gpd_observed_information: invalid model");
  const double sigma = params.scale;
  const double xi = params.shape;
  if (std::abs(xi) >= 1e-4) {
    Eigen::Vector2d grad;
    Eigen::Matrix2d hess;
    likelihood_derivatives(exceedances, sigma, xi, grad, hess);
    return -hess;
  }
  // near the exponential limit the closed forms cancel badly; central
  // differences with a wide step are stable there
  const auto ll = [&](double s, double x) {
    return gpd_log_likelihood_or_neg_inf(exceedances, {s, x});
  };
  const double hs = 1e-3 * sigma;
  const double hx = 1e-3;
  Eigen::Matrix2d hess;
  hess(0, 0) =
      (ll(sigma + hs, xi) - 2.0 * ll(sigma, xi) + ll(sigma - hs, xi)) / (hs * hs);
  hess(1, 1) =
      (ll(sigma, xi + hx) - 2.0 * ll(sigma, xi) + ll(sigma, xi - hx)) / (hx * hx);
  hess(0, 1) = hess(1, 0) =
      (ll(sigma + hs, xi + hx) - ll(sigma + hs, xi - hx) -
       ll(sigma - hs, xi + hx) + ll(sigma - hs, xi - hx)) /
      (4.0 * hs * hx);
  return -hess;
}

std::pair<double, VectorXd> select_threshold(
    const Eigen::Ref<const Eigen::VectorXd>& sample, double tau0) {
  validate_sample(sample);
  if (!(tau0 > 0.0 && tau0 < 1.0))
    throw Error("select_threshold: tau0 must lie in (0,1)");
  const double u = empirical_quantile(sample, tau0);
  Index k = 0;
  for (Index i = 0; i < sample.size(); ++i)
    if (sample[i] > u) ++k;
  if (k < kMinExceedances)
    throw TooFewExceedances("only " + std::to_string(k) +
                            " values exceed the threshold; need at least 5");
  VectorXd exc(k);
  Index j = 0;
  for (Index i = 0; i < sample.size(); ++i)
    if (sample[i] > u) exc[j++] = sample[i] - u;
  return {u, exc};
}

TailModel fit_tail_model(const Eigen::Ref<const Eigen::VectorXd>& sample,
                         double tau0) {
  auto [u, exc] = select_threshold(sample, tau0);
  TailModel model;
  model.threshold = u;
  model.n_exceed = exc.size();
  model.n_total = sample.size();
  model.tail_prob =
      static_cast<double>(model.n_exceed) / static_cast<double>(model.n_total);
  model.params = fit_gpd_mle(exc);
  return model;
}

double gpd_tail_quantile(const TailModel& model, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw Error("gpd_tail_quantile: level must lie in (0,1)");
  if (!(level > 1.0 - model.tail_prob))
    throw NotExtrapolating("level " + std::to_string(level) +
                           " is within the empirical range of the threshold");
  const double a = std::log(model.tail_prob / (1.0 - level));
  const double xi = model.params.shape;
  const double sigma = model.params.scale;
  if (std::abs(xi) < kShapeZeroTol) return model.threshold + sigma * a;
  return model.threshold + sigma * std::expm1(xi * a) / xi;
}

double gpd_survival(const TailModel& model, double y) {
  if (y < model.threshold)
    throw BelowThreshold("gpd_survival: y below the threshold");
  const double z = y - model.threshold;
  const double xi = model.params.shape;
  const double sigma = model.params.scale;
  if (std::abs(xi) < kShapeZeroTol)
    return model.tail_prob * std::exp(-z / sigma);
  const double t = 1.0 + xi * z / sigma;
  if (t <= 0.0) return 0.0;  // beyond the finite endpoint (shape < 0)
  return model.tail_prob * std::pow(t, -1.0 / xi);
}

Eigen::Vector2d gpd_quantile_gradient(const GpdParams& params,
                                      double tail_prob, double level) {
  if (!(level > 1.0 - tail_prob))
    throw NotExtrapolating("gpd_quantile_gradient: level below threshold");
  const double a = std::log(tail_prob / (1.0 - level));
  const double xi = params.shape;
  const double sigma = params.scale;
  Eigen::Vector2d g;
  if (std::abs(xi) < kShapeZeroTol) {
    // two-term series of ((r^xi - 1)/xi) and its xi-derivative around 0
    g[0] = a + xi * a * a / 2.0;
    g[1] = sigma * (a * a / 2.0 + xi * a * a * a / 3.0);
  } else {
    const double e = std::expm1(xi * a);  // r^xi - 1
    g[0] = e / xi;
    g[1] = sigma * (xi * a * (e + 1.0) - e) / (xi * xi);
  }
  return g;
}

}  // namespace exconf
