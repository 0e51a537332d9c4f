#include "exconf/distributions.hpp"

#include <cmath>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "exconf/types.hpp"

namespace exconf {

namespace {

void check_prob(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(std::string(what) + ": probability must lie in (0,1)");
}

}  // namespace

double normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::normal_distribution<>(), x);
}

double normal_quantile(double p) {
  check_prob(p, "normal_quantile");
  return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double student_t_cdf(double x, double nu) {
  if (!(nu > 0)) throw Error("student_t_cdf: nu must be positive");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::students_t_distribution<>(nu), x);
}

double student_t_quantile(double p, double nu) {
  check_prob(p, "student_t_quantile");
  if (!(nu > 0)) throw Error("student_t_quantile: nu must be positive");
  return boost::math::quantile(boost::math::students_t_distribution<>(nu), p);
}

double chi_squared_quantile(double p, double dof) {
  check_prob(p, "chi_squared_quantile");
  return boost::math::quantile(boost::math::chi_squared_distribution<>(dof), p);
}

double beta_cdf(double x, double a, double b) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  return boost::math::cdf(boost::math::beta_distribution<>(a, b), x);
}

}  // namespace exconf
