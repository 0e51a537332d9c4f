#include "exconf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "exconf/types.hpp"

namespace exconf {

void validate_sample(const Eigen::Ref<const Eigen::VectorXd>& sample) {
  if (sample.size() == 0) throw Error("empty sample");
  if (!sample.allFinite()) throw Error("sample contains non-finite values");
}

double empirical_quantile(const Eigen::Ref<const Eigen::VectorXd>& sample,
                          double tau) {
  validate_sample(sample);
  if (!(tau > 0.0 && tau <= 1.0))
    throw Error("empirical_quantile: tau must lie in (0,1]");
  const auto n = sample.size();
  // Snap n*tau to the integer below when it only exceeds it by float noise.
  auto k = static_cast<Eigen::Index>(
      std::ceil(static_cast<double>(n) * tau - 1e-9));
  k = std::clamp<Eigen::Index>(k, 1, n);
  std::vector<double> v(sample.data(), sample.data() + n);
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return v[static_cast<std::size_t>(k - 1)];
}

double interquartile_range(const Eigen::Ref<const Eigen::VectorXd>& sample) {
  return empirical_quantile(sample, 0.75) - empirical_quantile(sample, 0.25);
}

}  // namespace exconf
