#pragma once

#include <Eigen/Core>

namespace exconf {

/// Order statistic at 1-based index ceil(n*tau), i.e. the inverse empirical
/// CDF. tau in (0, 1]; index arithmetic snaps products that are integers up
/// to float noise.
double empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& sample,
                          double tau);

double interquartile_range(const Eigen::Ref<const Eigen::VectorXd>& sample);

/// Throws Error unless the sample is nonempty with all values finite.
void validate_sample(const Eigen::Ref<const Eigen::VectorXd>& sample);

}  // namespace exconf
