#pragma once

namespace exconf {

// Scalar distribution functions used for calibration levels, analytic
// coverage and the simulation noise models. Thin wrappers so the rest of the
// code never touches the backing library directly.

double normal_cdf(double x);
double normal_quantile(double p);

double student_t_cdf(double x, double nu);
double student_t_quantile(double p, double nu);

double chi_squared_quantile(double p, double dof);

double beta_cdf(double x, double a, double b);

}  // namespace exconf
