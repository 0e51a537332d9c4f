#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exconf/rng.hpp"
#include "exconf/types.hpp"

namespace exconf::sim {

enum class NoiseKind { student_t_varying_df, gaussian };
enum class PredictionSource { ground_truth, external_file };

inline constexpr int kCovariateDim = 10;

const char* to_string(NoiseKind k);

/// Covariate-dependent Student-t degrees of freedom,
/// nu(x) = 7/(1 + exp(4 x1 + 1.2)) + 3, range (3, 10).
double noise_df(double x1);

/// Conditional scale sigma(x) = 1 + 6 phi(x1, x2), phi the bivariate normal
/// density with correlation 0.9.
double scale_sigma(double x1, double x2);

/// Quantile of the (unscaled) noise at x.
double noise_quantile(double level, NoiseKind kind, double x1);

/// P(Y <= y | X = x); +-inf map to 1/0.
double conditional_cdf(double y, NoiseKind kind, double x1, double x2);

/// Conditional quantile of Y given x: sigma(x) * noise quantile.
double true_quantile(const Eigen::Ref<const Eigen::VectorXd>& x, double level,
                     NoiseKind kind);

struct DataSet {
  Eigen::MatrixXd x;  // n x 10, uniform on [-1,1]^10
  Eigen::VectorXd y;  // sigma(x) * noise
};

/// Draws per point: 10 uniforms for x, then one uniform fed through the
/// noise quantile (inverse-CDF sampling, deterministic per substream).
DataSet gen_data(Index n, NoiseKind kind, Rng& rng);

/// Kronecker (generalized golden ratio) low-discrepancy sequence mapped to
/// [-1,1]^dim. Deterministic.
Eigen::MatrixXd low_discrepancy_grid(Index n, int dim = kCovariateDim);

/// Mean over the grid of P(Y <= endpoint(x) | x). Infinite endpoints
/// contribute exactly 1.
double analytic_coverage(
    const std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>&
        upper_endpoint,
    NoiseKind kind, const Eigen::MatrixXd& grid);

/// One simulation cell.
struct SimScenario {
  NoiseKind noise = NoiseKind::student_t_varying_df;
  Index n_train = 5000;  // metadata; predictions are ground-truth or external
  Index n_cal = 1000;
  double alpha = 1e-3;
  Method method = Method::gpd_safeprofile;
  int repetitions = 100;
  PredictionSource prediction_source = PredictionSource::ground_truth;
  std::string prediction_file;  // external_file only
  std::uint64_t seed = 1;
  double tau0 = 0.95;
  Index test_grid_size = 4096;
  SplitRule split = SplitRule::sidak;
  int bootstrap_reps = 500;
  std::string cell_id;  // stable label used in reports
};

struct RepetitionOutcome {
  double coverage = 1.0;
  double q_hat = kInf;
  bool finite = false;
  std::string status = "ok";
};

struct CoverageReport {
  SimScenario scenario;
  std::vector<RepetitionOutcome> repetitions;
  double mean_coverage = 0;
  double min_coverage = 0;
  double q25_coverage = 0;
  double median_coverage = 0;
  double q75_coverage = 0;
  double max_coverage = 0;
  double finite_fraction = 0;
  std::map<std::string, int> failure_counts;  // statuses other than "ok"
};

/// Predictions supplied by an external model: one vector per repetition for
/// the calibration points, one vector for the test grid.
struct ExternalPredictions {
  std::vector<Eigen::VectorXd> calibration;
  Eigen::VectorXd test;
};

ExternalPredictions load_external_predictions(const std::string& path,
                                              const SimScenario& s);

/// Writes the ground-truth predictions for a scenario in the external-file
/// format (columns kind,rep,index,prediction,x1..x10). Feeding the file back
/// through the external_file source reproduces the ground_truth path
/// bit-exactly.
void export_ground_truth_predictions(const SimScenario& s,
                                     const std::string& path);

/// Runs one cell. Repetition r draws from substream (s.seed, r); repetitions
/// are split across `threads` with identical output for any thread count.
CoverageReport run_cell(const SimScenario& s, int threads = 1);

std::vector<CoverageReport> run_study(const std::vector<SimScenario>& grid,
                                      int threads = 1);

}  // namespace exconf::sim
