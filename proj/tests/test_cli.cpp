#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exconf/conformal.hpp"
#include "exconf/csv.hpp"
#include "exconf/rng.hpp"

using namespace exconf;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / ("exconf_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path file(const std::string& name, const std::string& content) const {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p;
  }
};

CliResult run_cli(const Workspace& ws, const std::string& args) {
  const char* bin = std::getenv("EXCONF_BIN");
  REQUIRE(bin != nullptr);
  static int call = 0;
  const fs::path out = ws.dir / ("stdout" + std::to_string(call));
  const fs::path err = ws.dir / ("stderr" + std::to_string(call));
  ++call;
  const std::string cmd = std::string(bin) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int raw = std::system(cmd.c_str());
  return {WEXITSTATUS(raw), slurp(out), slurp(err)};
}

std::string scores_csv_1_to_100() {
  std::string s = "score\n";
  for (int i = 1; i <= 100; ++i) s += std::to_string(i) + "\n";
  return s;
}

std::string strip_timestamp(const std::string& blob) {
  std::stringstream in(blob);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("created_at") == std::string::npos) out += line + "\n";
  return out;
}

}  // namespace

TEST_CASE("calibrate classical writes the expected artifact") {
  Workspace ws;
  const auto input = ws.file("scores.csv", scores_csv_1_to_100());
  const auto artifact = ws.dir / "artifact.json";
  const CliResult r = run_cli(
      ws, "calibrate --input " + input.string() + " --alpha 0.1 --method classical --out " +
              artifact.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("q_hat=91") != std::string::npos);

  nlohmann::json art;
  std::ifstream(artifact) >> art;
  CHECK(art.at("q_hat").get<double>() == 91.0);
  CHECK(art.at("finite").get<bool>());
  CHECK(art.at("method").get<std::string>() == "classical");
  CHECK(art.at("n_scores").get<int>() == 100);
}

TEST_CASE("calibrate in the degenerate regime warns and stays total") {
  Workspace ws;
  const auto input = ws.file("scores.csv", scores_csv_1_to_100());
  const auto artifact = ws.dir / "artifact.json";
  const CliResult r = run_cli(
      ws, "calibrate --input " + input.string() +
              " --alpha 0.005 --method classical --out " + artifact.string());
  CHECK(r.exit_code == 0);
  CHECK(r.err.find("warning") != std::string::npos);

  nlohmann::json art;
  std::ifstream(artifact) >> art;
  CHECK(art.at("q_hat").get<std::string>() == "inf");
  CHECK_FALSE(art.at("finite").get<bool>());
}

TEST_CASE("artifacts are byte-identical modulo the timestamp") {
  Workspace ws;
  Rng rng(808);
  std::string csv = "score\n";
  for (int i = 0; i < 2000; ++i)
    csv += format_double(std::expm1(-0.4 * std::log1p(-rng.uniform01())) / 0.4) + "\n";
  const auto input = ws.file("scores.csv", csv);
  const auto a1 = ws.dir / "a1.json";
  const auto a2 = ws.dir / "a2.json";
  const std::string args = "calibrate --input " + input.string() +
                           " --alpha 0.001 --method gpd_bootstrap --boot-reps 250 "
                           "--seed 31 --out ";
  CHECK(run_cli(ws, args + a1.string()).exit_code == 0);
  CHECK(run_cli(ws, args + a2.string()).exit_code == 0);
  CHECK(strip_timestamp(slurp(a1)) == strip_timestamp(slurp(a2)));
}

TEST_CASE("calibrate matches the direct library call") {
  Workspace ws;
  Rng rng(4711);
  VectorXd scores(3000);
  std::string csv = "score\n";
  for (Index i = 0; i < scores.size(); ++i) {
    scores[i] = std::expm1(-0.3 * std::log1p(-rng.uniform01())) / 0.3;
    csv += format_double(scores[i]) + "\n";
  }
  const auto input = ws.file("scores.csv", csv);
  const auto artifact = ws.dir / "artifact.json";
  const CliResult r = run_cli(
      ws, "calibrate --input " + input.string() +
              " --alpha 0.001 --method gpd_profile --seed 17 --out " +
              artifact.string());
  CHECK(r.exit_code == 0);

  ExtremeOptions opts;
  opts.seed = 17;
  const ConformalCorrection direct =
      extreme_correction(scores, 0.001, Method::gpd_profile, opts);
  nlohmann::json art;
  std::ifstream(artifact) >> art;
  CHECK(art.at("q_hat").get<double>() == direct.q_hat);
  CHECK(art.at("tail").at("shape").get<double>() == direct.tail->params.shape);

  // calibrate -> load -> predict equals the in-memory pipeline bit-exactly
  const auto preds = ws.file("p.csv", "prediction\n1.25\n-3.5\n");
  const CliResult p = run_cli(ws, "predict --artifact " + artifact.string() +
                                      " --predictions " + preds.string());
  CHECK(p.exit_code == 0);
  const std::string expected =
      "lower,upper\n-inf," + format_double(build_interval(1.25, direct).upper) +
      "\n-inf," + format_double(build_interval(-3.5, direct).upper) + "\n";
  CHECK(p.out == expected);
}

TEST_CASE("calibrate warns when the tail fit sees few exceedances") {
  Workspace ws;
  Rng rng(660);
  std::string csv = "score\n";
  for (int i = 0; i < 200; ++i)
    csv += format_double(-std::log1p(-rng.uniform01())) + "\n";
  const auto input = ws.file("scores.csv", csv);
  const CliResult r = run_cli(
      ws, "calibrate --input " + input.string() +
              " --alpha 0.001 --method gpd_simple --out " +
              (ws.dir / "a.json").string());
  CHECK(r.exit_code == 0);  // 10 exceedances: fit proceeds with a warning
  CHECK(r.err.find("exceedances") != std::string::npos);
}

TEST_CASE("predict produces interval rows, unilateral and bilateral") {
  Workspace ws;
  // constant scores make the classical correction exactly 2
  std::string cal = "score\n";
  for (int i = 0; i < 100; ++i) cal += "2.0\n";
  const auto cal_file = ws.file("cal.csv", cal);
  const auto artifact = ws.dir / "uni.json";
  CHECK(run_cli(ws, "calibrate --input " + cal_file.string() +
                        " --alpha 0.1 --method classical --out " +
                        artifact.string())
            .exit_code == 0);

  const auto preds = ws.file("preds.csv", "prediction\n10\n0.5\n");
  const auto out_csv = ws.dir / "intervals.csv";
  const CliResult p =
      run_cli(ws, "predict --artifact " + artifact.string() +
                      " --predictions " + preds.string() + " --out " +
                      out_csv.string());
  CHECK(p.exit_code == 0);
  CHECK(slurp(out_csv) == "lower,upper\n-inf,12\n-inf,2.5\n");

  // y-min propagates into the lower endpoint
  const CliResult pm =
      run_cli(ws, "predict --artifact " + artifact.string() +
                      " --predictions " + preds.string() + " --y-min 0");
  CHECK(pm.exit_code == 0);
  CHECK(pm.out.find("0,12") != std::string::npos);

  // bilateral: identical rows with score -0.5 give q_hat = -0.5
  std::string bil = "lower_pred,upper_pred,observed\n";
  for (int i = 0; i < 100; ++i) bil += "1,3,2.5\n";
  const auto bil_file = ws.file("bil.csv", bil);
  const auto bart = ws.dir / "bil.json";
  CHECK(run_cli(ws, "calibrate --input " + bil_file.string() +
                        " --alpha 0.1 --method classical --out " + bart.string())
            .exit_code == 0);
  const auto bpreds = ws.file("bpreds.csv", "lower_pred,upper_pred\n1,3\n");
  const CliResult bp = run_cli(ws, "predict --artifact " + bart.string() +
                                       " --predictions " + bpreds.string());
  CHECK(bp.exit_code == 0);
  CHECK(bp.out.find("1.5,2.5") != std::string::npos);

  // schema mismatch is a data error
  const CliResult mis = run_cli(ws, "predict --artifact " + bart.string() +
                                        " --predictions " + preds.string());
  CHECK(mis.exit_code == 3);
}

TEST_CASE("predict with an infinite artifact emits trivial rows") {
  Workspace ws;
  const auto input = ws.file("scores.csv", scores_csv_1_to_100());
  const auto artifact = ws.dir / "inf.json";
  CHECK(run_cli(ws, "calibrate --input " + input.string() +
                        " --alpha 0.005 --method classical --out " +
                        artifact.string())
            .exit_code == 0);
  const auto preds = ws.file("preds.csv", "prediction\n1\n2\n3\n");
  const CliResult p = run_cli(ws, "predict --artifact " + artifact.string() +
                                      " --predictions " + preds.string());
  CHECK(p.exit_code == 0);
  CHECK(p.out == "lower,upper\n-inf,inf\n-inf,inf\n-inf,inf\n");
  CHECK(p.err.find("warning") != std::string::npos);
}

TEST_CASE("evaluate reports coverage and exceedance ratio") {
  Workspace ws;
  std::string intervals = "lower,upper\n";
  std::string obs = "observed\n";
  // 10000 rows, 10 observations above their interval
  for (int i = 0; i < 10000; ++i) {
    intervals += "-inf,1\n";
    obs += (i < 10 ? "2\n" : "0.5\n");
  }
  const auto iv = ws.file("intervals.csv", intervals);
  const auto ob = ws.file("obs.csv", obs);
  const CliResult r = run_cli(ws, "evaluate --intervals " + iv.string() +
                                      " --observations " + ob.string() +
                                      " --alpha 0.001");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("exceedances=10") != std::string::npos);
  const bool ratio_one = r.out.find("ratio=1 ") != std::string::npos ||
                         r.out.find("ratio=1\n") != std::string::npos;
  CHECK(ratio_one);

  // all inside
  const auto iv2 = ws.file("iv2.csv", "lower,upper\n0,1\n0,1\n");
  const auto ob2 = ws.file("ob2.csv", "observed\n0.5\n0.7\n");
  const CliResult r2 = run_cli(ws, "evaluate --intervals " + iv2.string() +
                                       " --observations " + ob2.string() +
                                       " --alpha 0.1");
  CHECK(r2.exit_code == 0);
  CHECK(r2.out.find("coverage=1 ") != std::string::npos);
  CHECK(r2.out.find("exceedances=0") != std::string::npos);

  // trivial intervals warn
  const auto iv3 = ws.file("iv3.csv", "lower,upper\n-inf,inf\n-inf,inf\n");
  const CliResult r3 = run_cli(ws, "evaluate --intervals " + iv3.string() +
                                       " --observations " + ob2.string() +
                                       " --alpha 0.1");
  CHECK(r3.exit_code == 0);
  CHECK(r3.err.find("warning") != std::string::npos);

  // length mismatch is a data error
  const auto ob3 = ws.file("ob3.csv", "observed\n0.5\n");
  const CliResult r4 = run_cli(ws, "evaluate --intervals " + iv2.string() +
                                       " --observations " + ob3.string() +
                                       " --alpha 0.1");
  CHECK(r4.exit_code == 3);
}

TEST_CASE("simulate runs a study deterministically") {
  Workspace ws;
  const auto cfg = ws.file("study.cfg",
                           "n_cal = 100\n"
                           "alpha = 0.01\n"
                           "method = classical\n"
                           "repetitions = 3\n"
                           "test_grid = 128\n"
                           "seed = 9\n");
  const auto out1 = ws.dir / "run1";
  const auto out2 = ws.dir / "run2";
  const auto out4 = ws.dir / "run4";
  CHECK(run_cli(ws, "simulate --config " + cfg.string() + " --out " + out1.string())
            .exit_code == 0);
  CHECK(run_cli(ws, "simulate --config " + cfg.string() + " --out " + out2.string())
            .exit_code == 0);
  CHECK(run_cli(ws, "simulate --config " + cfg.string() + " --out " +
                        out4.string() + " --threads 4")
            .exit_code == 0);
  CHECK(slurp(out1 / "results.csv") == slurp(out2 / "results.csv"));
  CHECK(slurp(out1 / "results.csv") == slurp(out4 / "results.csv"));
  CHECK(slurp(out1 / "summary.json") == slurp(out4 / "summary.json"));
  CHECK(slurp(out1 / "results.csv").find("classical") != std::string::npos);
}

TEST_CASE("simulate reports degenerate classical cells as trivial") {
  Workspace ws;
  // alpha below 1/(n_cal + 1): every repetition must be infinite with
  // analytic coverage exactly 1
  const auto cfg = ws.file("deg.cfg",
                           "n_cal = 100\n"
                           "alpha = 0.001\n"
                           "method = classical\n"
                           "repetitions = 5\n"
                           "test_grid = 128\n"
                           "seed = 2\n");
  const auto out = ws.dir / "deg";
  CHECK(run_cli(ws, "simulate --config " + cfg.string() + " --out " + out.string())
            .exit_code == 0);
  const CsvTable t = read_csv((out / "results.csv").string());
  REQUIRE(t.rows.size() == 5);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(t.num(i, t.col("coverage")) == 1.0);
    CHECK(t.num(i, t.col("finite")) == 0.0);
    CHECK(t.rows[i][static_cast<std::size_t>(t.col("q_hat"))] == "inf");
  }
}

TEST_CASE("EXCONF_QUIET silences informational output only") {
  Workspace ws;
  const auto input = ws.file("scores.csv", scores_csv_1_to_100());
  const char* bin = std::getenv("EXCONF_BIN");
  REQUIRE(bin != nullptr);
  const fs::path out = ws.dir / "quiet_out";
  const std::string cmd = "EXCONF_QUIET=1 " + std::string(bin) +
                          " calibrate --input " + input.string() +
                          " --alpha 0.1 --method classical --out " +
                          (ws.dir / "q.json").string() + " >" + out.string();
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(slurp(out).empty());
  CHECK(fs::exists(ws.dir / "q.json"));
}

TEST_CASE("simulate rejects malformed configs without partial outputs") {
  Workspace ws;
  const auto cfg = ws.file("bad.cfg", "n_cal = 100\nalpha = 0.01\n");  // no method
  const auto out = ws.dir / "never";
  const CliResult r =
      run_cli(ws, "simulate --config " + cfg.string() + " --out " + out.string());
  CHECK(r.exit_code == 3);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("simulate exports a predictions template for a single cell") {
  Workspace ws;
  const auto cfg = ws.file("one.cfg",
                           "n_cal = 100\nalpha = 0.01\nmethod = classical\n"
                           "repetitions = 2\ntest_grid = 64\nseed = 4\n");
  const auto preds = ws.dir / "preds.csv";
  CHECK(run_cli(ws, "simulate --config " + cfg.string() +
                        " --export-predictions " + preds.string())
            .exit_code == 0);
  const CsvTable t = read_csv(preds.string());
  CHECK(t.rows.size() == 2 * 100 + 64);
  CHECK(t.has_col("prediction"));

  const auto two = ws.file("two.cfg",
                           "n_cal = 100\nalpha = 0.01, 0.02\nmethod = classical\n");
  CHECK(run_cli(ws, "simulate --config " + two.string() +
                        " --export-predictions " + preds.string())
            .exit_code == 2);
}

TEST_CASE("usage and data errors map to distinct exit codes") {
  Workspace ws;
  const auto input = ws.file("scores.csv", scores_csv_1_to_100());
  CHECK(run_cli(ws, "calibrate --input " + input.string() +
                        " --alpha 0.1 --method not_a_method --out x.json")
            .exit_code == 2);
  CHECK(run_cli(ws, "calibrate --input /nonexistent.csv --alpha 0.1 --out x.json")
            .exit_code == 3);
  CHECK(run_cli(ws, "nonsense").exit_code == 2);
  // numerical failure: GPD method on a sample with too few exceedances
  std::string tiny = "score\n";
  for (int i = 0; i < 30; ++i) tiny += std::to_string(i) + "\n";
  const auto tiny_file = ws.file("tiny.csv", tiny);
  CHECK(run_cli(ws, "calibrate --input " + tiny_file.string() +
                        " --alpha 0.001 --method gpd_simple --out " +
                        (ws.dir / "t.json").string())
            .exit_code == 4);
}
