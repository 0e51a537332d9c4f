#include "exconf/sim_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "exconf/csv.hpp"

namespace exconf::sim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long parse_count(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ParseError("config: bad integer for '" + key + "': '" + v + "'");
  }
}

NoiseKind parse_noise(const std::string& v) {
  if (v == "student_t" || v == "student_t_varying_df" || v == "t")
    return NoiseKind::student_t_varying_df;
  if (v == "gaussian" || v == "normal") return NoiseKind::gaussian;
  throw ParseError("config: unknown noise '" + v + "'");
}

}  // namespace

std::vector<SimScenario> parse_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");

  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) +
                       ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("config line " + std::to_string(lineno) +
                       ": empty key or value");
    if (kv.count(key))
      throw ParseError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  static const char* known[] = {"noise",      "n_cal",       "alpha",
                                "method",     "split",       "repetitions",
                                "seed",       "tau0",        "test_grid",
                                "boot_reps",  "predictions", "n_train"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ParseError("config: unknown key '" + key + "'");
  }
  for (const char* required : {"n_cal", "alpha", "method"}) {
    if (!kv.count(required))
      throw ParseError("config: missing required key '" +
                       std::string(required) + "'");
  }

  std::vector<NoiseKind> noises;
  for (const auto& v : split_list(kv.count("noise") ? kv["noise"] : "student_t"))
    noises.push_back(parse_noise(v));

  std::vector<Index> n_cals;
  for (const auto& v : split_list(kv["n_cal"]))
    n_cals.push_back(parse_count(v, "n_cal"));

  std::vector<double> alphas;
  for (const auto& v : split_list(kv["alpha"])) {
    double a = 0;
    try {
      a = parse_double(v);
    } catch (const ParseError&) {
      throw ParseError("config: bad alpha '" + v + "'");
    }
    if (!(a > 0.0 && a < 1.0))
      throw ParseError("config: alpha must lie in (0,1), got '" + v + "'");
    alphas.push_back(a);
  }

  std::vector<Method> methods;
  for (const auto& v : split_list(kv["method"])) {
    const auto m = method_from_string(v);
    if (!m) throw ParseError("config: unknown method '" + v + "'");
    methods.push_back(*m);
  }

  SimScenario proto;
  if (kv.count("split")) {
    const auto s = split_from_string(kv["split"]);
    if (!s) throw ParseError("config: unknown split '" + kv["split"] + "'");
    proto.split = *s;
  }
  if (kv.count("repetitions"))
    proto.repetitions =
        static_cast<int>(parse_count(kv["repetitions"], "repetitions"));
  if (proto.repetitions < 1)
    throw ParseError("config: repetitions must be >= 1");
  std::uint64_t seed = 1;
  if (kv.count("seed"))
    seed = static_cast<std::uint64_t>(parse_count(kv["seed"], "seed"));
  if (kv.count("tau0")) {
    proto.tau0 = parse_double(kv["tau0"]);
    if (!(proto.tau0 > 0.0 && proto.tau0 < 1.0))
      throw ParseError("config: tau0 must lie in (0,1)");
  }
  if (kv.count("test_grid"))
    proto.test_grid_size = parse_count(kv["test_grid"], "test_grid");
  if (proto.test_grid_size < 1)
    throw ParseError("config: test_grid must be >= 1");
  if (kv.count("boot_reps"))
    proto.bootstrap_reps =
        static_cast<int>(parse_count(kv["boot_reps"], "boot_reps"));
  if (kv.count("n_train"))
    proto.n_train = parse_count(kv["n_train"], "n_train");
  if (kv.count("predictions") && kv["predictions"] != "ground_truth") {
    proto.prediction_source = PredictionSource::external_file;
    proto.prediction_file = kv["predictions"];
  }

  std::vector<SimScenario> grid;
  std::uint64_t idx = 0;
  for (NoiseKind noise : noises) {
    for (Index n_cal : n_cals) {
      if (n_cal < 100) throw ParseError("config: n_cal must be >= 100");
      for (double alpha : alphas) {
        for (Method method : methods) {
          SimScenario s = proto;
          s.noise = noise;
          s.n_cal = n_cal;
          s.alpha = alpha;
          s.method = method;
          s.seed = substream_seed(seed, idx, 0xCE11);
          s.cell_id = "c" + std::to_string(idx);
          grid.push_back(std::move(s));
          ++idx;
        }
      }
    }
  }
  return grid;
}

void write_results_csv(const std::vector<CoverageReport>& reports,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "cell,noise,n_train,n_cal,alpha,method,split,tau0,seed,rep,q_hat,"
         "finite,status,coverage\n";
  for (const auto& rep : reports) {
    const auto& s = rep.scenario;
    for (std::size_t r = 0; r < rep.repetitions.size(); ++r) {
      const auto& o = rep.repetitions[r];
      out << s.cell_id << ',' << to_string(s.noise) << ',' << s.n_train << ','
          << s.n_cal << ',' << format_double(s.alpha) << ','
          << to_string(s.method) << ',' << to_string(s.split) << ','
          << format_double(s.tau0) << ',' << s.seed << ',' << r << ','
          << format_double(o.q_hat) << ',' << (o.finite ? 1 : 0) << ','
          << o.status << ',' << format_double(o.coverage) << '\n';
    }
  }
}

void write_summary_json(const std::vector<CoverageReport>& reports,
                        const std::string& path) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& rep : reports) {
    const auto& s = rep.scenario;
    nlohmann::json cell;
    cell["cell"] = s.cell_id;
    cell["noise"] = to_string(s.noise);
    cell["n_train"] = s.n_train;
    cell["n_cal"] = s.n_cal;
    cell["alpha"] = s.alpha;
    cell["method"] = to_string(s.method);
    cell["split"] = to_string(s.split);
    cell["tau0"] = s.tau0;
    cell["seed"] = s.seed;
    cell["repetitions"] = s.repetitions;
    cell["bootstrap_reps"] = s.bootstrap_reps;
    cell["test_grid"] = s.test_grid_size;
    cell["coverage_mean"] = rep.mean_coverage;
    cell["coverage_min"] = rep.min_coverage;
    cell["coverage_q25"] = rep.q25_coverage;
    cell["coverage_median"] = rep.median_coverage;
    cell["coverage_q75"] = rep.q75_coverage;
    cell["coverage_max"] = rep.max_coverage;
    cell["finite_fraction"] = rep.finite_fraction;
    cell["failures"] = rep.failure_counts;
    cells.push_back(std::move(cell));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << cells.dump(2) << '\n';
}

ExternalPredictions load_external_predictions(const std::string& path,
                                              const SimScenario& s) {
  const CsvTable table = read_csv(path);
  const auto kind_c = table.col("kind");
  const auto rep_c = table.col("rep");
  const auto index_c = table.col("index");
  const auto pred_c = table.col("prediction");

  ExternalPredictions out;
  out.calibration.assign(static_cast<std::size_t>(s.repetitions),
                         Eigen::VectorXd::Constant(s.n_cal, kInf));
  out.test = Eigen::VectorXd::Constant(s.test_grid_size, kInf);

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& kind = table.rows[r][static_cast<std::size_t>(kind_c)];
    const auto idx = static_cast<Index>(table.num(r, index_c));
    const double pred = table.num(r, pred_c);
    if (kind == "cal") {
      const auto rep = static_cast<long>(table.num(r, rep_c));
      if (rep < 0 || rep >= s.repetitions || idx < 0 || idx >= s.n_cal)
        throw ParseError("prediction file: cal row out of range");
      out.calibration[static_cast<std::size_t>(rep)][idx] = pred;
    } else if (kind == "test") {
      if (idx < 0 || idx >= s.test_grid_size)
        throw ParseError("prediction file: test row out of range");
      out.test[idx] = pred;
    } else {
      throw ParseError("prediction file: unknown kind '" + kind + "'");
    }
  }

  for (const auto& v : out.calibration)
    if (!v.allFinite())
      throw ParseError("prediction file: missing calibration predictions");
  if (!out.test.allFinite())
    throw ParseError("prediction file: missing test predictions");
  return out;
}

void export_ground_truth_predictions(const SimScenario& s,
                                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "kind,rep,index,prediction";
  for (int j = 1; j <= kCovariateDim; ++j) out << ",x" << j;
  out << '\n';

  const double level = 1.0 - s.alpha;
  for (int rep = 0; rep < s.repetitions; ++rep) {
    // same substream and draw order as run_cell's repetitions
    Rng rng(substream_seed(s.seed, static_cast<std::uint64_t>(rep)));
    const DataSet data = gen_data(s.n_cal, s.noise, rng);
    for (Index i = 0; i < s.n_cal; ++i) {
      out << "cal," << rep << ',' << i << ','
          << format_double(true_quantile(data.x.row(i), level, s.noise));
      for (int j = 0; j < kCovariateDim; ++j)
        out << ',' << format_double(data.x(i, j));
      out << '\n';
    }
  }
  const Eigen::MatrixXd grid = low_discrepancy_grid(s.test_grid_size);
  for (Index i = 0; i < grid.rows(); ++i) {
    out << "test,-1," << i << ','
        << format_double(true_quantile(grid.row(i), level, s.noise));
    for (int j = 0; j < kCovariateDim; ++j)
      out << ',' << format_double(grid(i, j));
    out << '\n';
  }
}

}  // namespace exconf::sim
