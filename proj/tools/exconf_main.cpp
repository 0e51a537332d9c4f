#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exconf/conformal.hpp"
#include "exconf/csv.hpp"
#include "exconf/gpd.hpp"
#include "exconf/sim_io.hpp"
#include "exconf/simlab.hpp"
#include "exconf/types.hpp"
#include "exconf/version.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// EXCONF_QUIET suppresses informational stdout lines; data outputs and
// stderr warnings are unaffected.
bool quiet() {
  const char* q = std::getenv("EXCONF_QUIET");
  return q != nullptr && q[0] != '\0' && std::string(q) != "0";
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw exconf::ParseError("cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json finite_or_token(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double from_finite_or_token(const json& j) {
  if (j.is_string()) return exconf::parse_double(j.get<std::string>());
  return j.get<double>();
}

struct CalibrateArgs {
  std::string input;
  std::string output;
  double alpha = 0.1;
  std::string method = "classical";
  double tau0 = 0.95;
  std::string split = "sidak";
  int boot_reps = 1000;
  std::uint64_t seed = 1;
  std::string sidedness;  // empty: infer from schema, default unilateral
};

// Scores plus the sidedness implied by the input schema.
std::pair<exconf::VectorXd, exconf::Sidedness> load_scores(
    const std::string& path, const std::string& sidedness_flag) {
  const exconf::CsvTable t = exconf::read_csv(path);
  exconf::VectorXd scores;
  exconf::Sidedness sided = exconf::Sidedness::unilateral_upper;
  bool schema_fixed = false;

  if (t.has_col("score")) {
    scores = t.numeric_column("score");
  } else if (t.has_col("lower_pred") && t.has_col("upper_pred") &&
             t.has_col("observed")) {
    const auto lo = t.col("lower_pred"), hi = t.col("upper_pred"),
               ob = t.col("observed");
    scores.resize(static_cast<exconf::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      scores[static_cast<exconf::Index>(i)] = exconf::score_bilateral(
          t.num(i, lo), t.num(i, hi), t.num(i, ob));
    sided = exconf::Sidedness::bilateral;
    schema_fixed = true;
  } else if (t.has_col("prediction") && t.has_col("observed")) {
    const auto pr = t.col("prediction"), ob = t.col("observed");
    scores.resize(static_cast<exconf::Index>(t.rows.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      scores[static_cast<exconf::Index>(i)] =
          exconf::score_unilateral(t.num(i, pr), t.num(i, ob));
    schema_fixed = true;
  } else {
    throw exconf::ParseError(
        "'" + path +
        "': expected columns 'score', 'prediction,observed' or "
        "'lower_pred,upper_pred,observed'");
  }

  if (!sidedness_flag.empty()) {
    const auto s = exconf::sidedness_from_string(sidedness_flag);
    if (!s) throw CLI::ValidationError("--sidedness", "unknown value");
    if (schema_fixed && *s != sided)
      throw exconf::SidednessMismatch(
          "--sidedness contradicts the input schema");
    sided = *s;
  }
  return {std::move(scores), sided};
}

int run_calibrate(const CalibrateArgs& a) {
  const auto method = exconf::method_from_string(a.method);
  if (!method) throw CLI::ValidationError("--method", "unknown method");
  const auto split = exconf::split_from_string(a.split);
  if (!split) throw CLI::ValidationError("--split", "unknown split");
  if (!(a.alpha > 0.0 && a.alpha < 1.0))
    throw CLI::ValidationError("--alpha", "must lie in (0,1)");
  if (!(a.tau0 > 0.0 && a.tau0 < 1.0))
    throw CLI::ValidationError("--tau0", "must lie in (0,1)");

  auto [scores, sided] = load_scores(a.input, a.sidedness);

  exconf::ExtremeOptions opts;
  opts.tau0 = a.tau0;
  opts.split = *split;
  opts.bootstrap_reps = a.boot_reps;
  opts.seed = a.seed;
  opts.sidedness = sided;

  const exconf::ConformalCorrection corr =
      *method == exconf::Method::classical
          ? exconf::classical_correction(scores, a.alpha, sided)
          : exconf::extreme_correction(scores, a.alpha, *method, opts);

  json art;
  art["tool"] = exconf::kToolName;
  art["version"] = exconf::kToolVersion;
  art["created_at"] = iso_now();
  art["input_digest"] = "fnv1a:" + hex64(fnv1a_file(a.input));
  art["n_scores"] = scores.size();
  art["alpha"] = a.alpha;
  art["requested_method"] = a.method;
  art["method"] = exconf::to_string(corr.method);
  art["sidedness"] = exconf::to_string(sided);
  art["tau0"] = a.tau0;
  art["split"] = exconf::to_string(*split);
  const exconf::ConfidenceSpec spec = exconf::split_levels(a.alpha, *split);
  art["alpha1"] = spec.alpha1;
  art["alpha2"] = spec.alpha2;
  art["seed"] = a.seed;
  art["bootstrap_reps"] = a.boot_reps;
  art["q_hat"] = finite_or_token(corr.q_hat);
  art["finite"] = corr.finite;

  std::vector<std::string> warnings;
  if (!corr.finite)
    warnings.push_back(
        "correction is infinite: alpha below 1/(n+1); intervals are trivial");
  if (corr.tail) {
    const auto& tm = *corr.tail;
    art["tail"] = {{"threshold", tm.threshold},
                   {"tail_prob", tm.tail_prob},
                   {"scale", tm.params.scale},
                   {"shape", tm.params.shape},
                   {"n_exceed", tm.n_exceed},
                   {"n_total", tm.n_total}};
    if (tm.small_sample())
      warnings.push_back("only " + std::to_string(tm.n_exceed) +
                         " exceedances; tail fit is unstable below 30");
  }
  if (corr.ci) {
    art["ci"] = {{"point_estimate", corr.ci->point_estimate},
                 {"upper_endpoint", finite_or_token(corr.ci->upper_endpoint)},
                 {"status", exconf::to_string(corr.ci->status)},
                 {"method", exconf::to_string(corr.ci->method)}};
  }
  art["warnings"] = warnings;

  std::ofstream out(a.output);
  if (!out) throw exconf::Error("cannot write '" + a.output + "'");
  out << art.dump(2) << '\n';

  if (!quiet()) {
    std::cout << "method=" << exconf::to_string(corr.method)
              << " q_hat=" << exconf::format_double(corr.q_hat)
              << " finite=" << (corr.finite ? "true" : "false");
    if (corr.tail)
      std::cout << " n_exceed=" << corr.tail->n_exceed
                << " sigma=" << exconf::format_double(corr.tail->params.scale)
                << " xi=" << exconf::format_double(corr.tail->params.shape);
    if (corr.ci) std::cout << " status=" << exconf::to_string(corr.ci->status);
    std::cout << '\n';
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return kExitOk;
}

int run_predict(const std::string& artifact_path,
                const std::string& predictions_path, double y_min,
                const std::string& out_path) {
  std::ifstream in(artifact_path);
  if (!in) throw exconf::ParseError("cannot open '" + artifact_path + "'");
  json art;
  try {
    in >> art;
  } catch (const json::exception& e) {
    throw exconf::ParseError("bad artifact: " + std::string(e.what()));
  }

  exconf::ConformalCorrection corr;
  try {
    corr.q_hat = from_finite_or_token(art.at("q_hat"));
    corr.finite = art.at("finite").get<bool>();
    const auto sided =
        exconf::sidedness_from_string(art.at("sidedness").get<std::string>());
    const auto method =
        exconf::method_from_string(art.at("method").get<std::string>());
    if (!sided || !method) throw exconf::ParseError("bad artifact enums");
    corr.sidedness = *sided;
    corr.method = *method;
  } catch (const json::exception& e) {
    throw exconf::ParseError("bad artifact: " + std::string(e.what()));
  }

  const exconf::CsvTable t = exconf::read_csv(predictions_path);
  std::vector<exconf::PredictionInterval> intervals;
  intervals.reserve(t.rows.size());
  if (corr.sidedness == exconf::Sidedness::unilateral_upper) {
    if (!t.has_col("prediction"))
      throw exconf::SidednessMismatch(
          "unilateral artifact needs a 'prediction' column");
    const auto pr = t.col("prediction");
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      intervals.push_back(
          exconf::build_interval(t.num(i, pr), corr, y_min));
  } else {
    if (!t.has_col("lower_pred") || !t.has_col("upper_pred"))
      throw exconf::SidednessMismatch(
          "bilateral artifact needs 'lower_pred' and 'upper_pred' columns");
    const auto lo = t.col("lower_pred"), hi = t.col("upper_pred");
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      intervals.push_back(
          exconf::build_interval(t.num(i, lo), t.num(i, hi), corr));
  }

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw exconf::Error("cannot write '" + out_path + "'");
    os = &file;
  }
  *os << "lower,upper\n";
  for (const auto& iv : intervals)
    *os << exconf::format_double(iv.lower) << ','
        << exconf::format_double(iv.upper) << '\n';
  if (!corr.finite)
    std::cerr << "warning: infinite correction; all intervals are trivial\n";
  return kExitOk;
}

int run_evaluate(const std::string& intervals_path,
                 const std::string& observations_path, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw CLI::ValidationError("--alpha", "must lie in (0,1)");
  const exconf::CsvTable ti = exconf::read_csv(intervals_path);
  const exconf::CsvTable to = exconf::read_csv(observations_path);
  const exconf::VectorXd lower = ti.numeric_column("lower");
  const exconf::VectorXd upper = ti.numeric_column("upper");
  const exconf::VectorXd obs = to.numeric_column("observed");
  if (obs.size() != lower.size())
    throw exconf::Error("row count mismatch: " + std::to_string(lower.size()) +
                        " intervals vs " + std::to_string(obs.size()) +
                        " observations");

  const auto n = obs.size();
  long exceed = 0;
  long inside = 0;
  bool all_trivial = true;
  for (exconf::Index i = 0; i < n; ++i) {
    if (obs[i] > upper[i] || obs[i] < lower[i])
      ++exceed;
    else
      ++inside;
    all_trivial = all_trivial && std::isinf(upper[i]) && std::isinf(lower[i]);
  }
  const double coverage =
      static_cast<double>(inside) / static_cast<double>(n);
  const double expected = alpha * static_cast<double>(n);
  const double ratio = static_cast<double>(exceed) / expected;
  std::cout << "n=" << n << " coverage=" << exconf::format_double(coverage)
            << " exceedances=" << exceed
            << " expected=" << exconf::format_double(expected)
            << " ratio=" << exconf::format_double(ratio) << '\n';
  if (all_trivial)
    std::cerr << "warning: every interval is trivial (-inf, inf); coverage 1 "
                 "is uninformative\n";
  return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 int threads, const std::string& export_path) {
  // Parse and validate everything before touching the filesystem so a bad
  // config cannot leave partial outputs behind.
  const std::vector<exconf::sim::SimScenario> grid =
      exconf::sim::parse_study_config(config_path);

  if (!export_path.empty()) {
    if (grid.size() != 1)
      throw CLI::ValidationError(
          "--export-predictions",
          "requires a single-cell config (one noise/n_cal/alpha/method)");
    exconf::sim::export_ground_truth_predictions(grid[0], export_path);
    if (!quiet()) std::cout << "wrote " << export_path << '\n';
    return kExitOk;
  }
  if (out_dir.empty())
    throw CLI::ValidationError("--out", "output directory required");

  const auto reports = exconf::sim::run_study(grid, threads);
  std::filesystem::create_directories(out_dir);
  const std::string results = out_dir + "/results.csv";
  const std::string summary = out_dir + "/summary.json";
  exconf::sim::write_results_csv(reports, results);
  exconf::sim::write_summary_json(reports, summary);
  if (!quiet())
    std::cout << "wrote " << results << '\n' << "wrote " << summary << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"extreme conformal prediction calibration"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand(
      "calibrate", "calibrate a conformal correction from scores");
  calibrate->add_option("--input", cal.input, "scores/predictions CSV")
      ->required();
  calibrate->add_option("--out", cal.output, "artifact path")->required();
  calibrate->add_option("--alpha", cal.alpha, "target miscoverage")
      ->required();
  calibrate->add_option("--method", cal.method,
                        "classical|gpd_simple|gpd_profile|gpd_bootstrap|"
                        "gpd_delta|gpd_safeprofile");
  calibrate->add_option("--tau0", cal.tau0, "GPD threshold level");
  calibrate->add_option("--split", cal.split, "bonferroni|sidak");
  calibrate->add_option("--boot-reps", cal.boot_reps, "bootstrap replicates");
  calibrate->add_option("--seed", cal.seed, "RNG seed");
  calibrate->add_option("--sidedness", cal.sidedness,
                        "unilateral|bilateral (score-only inputs)");

  std::string artifact_path, predictions_path, predict_out;
  std::string y_min_token = "-inf";
  auto* predict =
      app.add_subcommand("predict", "build intervals from an artifact");
  predict->add_option("--artifact", artifact_path, "calibration artifact")
      ->required();
  predict->add_option("--predictions", predictions_path, "predictions CSV")
      ->required();
  predict->add_option("--y-min", y_min_token,
                      "lower endpoint of unilateral intervals");
  predict->add_option("--out", predict_out, "output CSV (default stdout)");

  std::string intervals_path, observations_path;
  double eval_alpha = 0.1;
  auto* evaluate =
      app.add_subcommand("evaluate", "empirical coverage of intervals");
  evaluate->add_option("--intervals", intervals_path, "intervals CSV")
      ->required();
  evaluate->add_option("--observations", observations_path, "observed CSV")
      ->required();
  evaluate->add_option("--alpha", eval_alpha, "target miscoverage")
      ->required();

  std::string config_path, sim_out, export_path;
  int threads = 1;
  auto* simulate =
      app.add_subcommand("simulate", "run a coverage simulation study");
  simulate->add_option("--config", config_path, "study config")->required();
  simulate->add_option("--out", sim_out, "output directory");
  simulate->add_option("--threads", threads, "worker threads");
  simulate->add_option("--export-predictions", export_path,
                       "write ground-truth predictions template and exit");

  try {
    app.parse(argc, argv);
    if (*calibrate) return run_calibrate(cal);
    if (*predict)
      return run_predict(artifact_path, predictions_path,
                         exconf::parse_double(y_min_token), predict_out);
    if (*evaluate)
      return run_evaluate(intervals_path, observations_path, eval_alpha);
    if (*simulate)
      return run_simulate(config_path, sim_out, threads, export_path);
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const exconf::ParseError& e) {
    std::cerr << "error[data]: " << e.what() << '\n';
    return kExitData;
  } catch (const exconf::SidednessMismatch& e) {
    std::cerr << "error[data]: " << e.what() << '\n';
    return kExitData;
  } catch (const exconf::InvertedPredictions& e) {
    std::cerr << "error[data]: " << e.what() << '\n';
    return kExitData;
  } catch (const exconf::TooFewExceedances& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const exconf::NonConvergence& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const exconf::DegenerateBootstrap& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const exconf::NotExtrapolating& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const exconf::DegenerateLevel& e) {
    std::cerr << "error[numerical]: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const exconf::Error& e) {
    std::cerr << "error[data]: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
