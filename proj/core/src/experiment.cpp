#include "udil/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "udil/errors.hpp"
#include "udil/idx.hpp"
#include "udil/metrics.hpp"

namespace udil {

using Json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

DomainStream load_stream(const DatasetConfig& cfg) {
  if (!cfg.data_file.empty()) return read_stream(cfg.data_file);
  switch (cfg.kind) {
    case DatasetKind::kHdBalls:
      return gen_hd_balls(cfg.data_seed, cfg.domains, cfg.points_per_domain, cfg.dim, cfg.sigma);
    case DatasetKind::kPermutedMnist:
    case DatasetKind::kRotatedMnist: {
      const auto& dir = cfg.mnist_dir;
      const LabeledSet train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
      const LabeledSet test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
      const std::uint64_t seed = substream_seed(cfg.data_seed, "data");
      if (cfg.kind == DatasetKind::kPermutedMnist) {
        return permuted_stream(train, test, cfg.domains, seed, cfg.train_per_domain, cfg.test_per_domain);
      }
      return rotated_stream(train, test, cfg.domains, seed, cfg.train_per_domain, cfg.test_per_domain);
    }
  }
  throw ConfigError("unknown dataset");
}

SeedMetrics compute_metrics(const AccuracyMatrix& R, const std::vector<double>& baseline) {
  const int T = R.size();
  SeedMetrics m;
  m.avg_acc = avg_acc(R, T);
  m.avg_of_avg = avg_of_avg(R, 1, T);
  if (T >= 2) {
    m.forgetting = forgetting(R, T);
    m.forward_transfer = forward_transfer(R, baseline, T);
  }
  return m;
}

ExperimentOutcome run_experiment(const RunConfig& cfg, const DomainStream& stream) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentOutcome out;
  out.fingerprint = stream.fingerprint();
  const std::size_t n = cfg.seeds.size();
  std::vector<std::optional<SeedRun>> slots(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        SeedRun r;
        r.seed = cfg.seeds[k];
        r.result = run_sequence(stream, cfg.train, r.seed);
        r.metrics = compute_metrics(r.result.R, r.result.baseline);
        slots[k] = std::move(r);
      } catch (const std::exception& e) {
        errors[k] = "seed " + std::to_string(cfg.seeds[k]) + ": " + e.what();
      }
    }
  };
  const int threads = std::min<int>(cfg.workers, static_cast<int>(n));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (slots[k]) {
      out.runs.push_back(std::move(*slots[k]));
    } else {
      out.partial = true;
      out.error += (out.error.empty() ? "" : "; ") + errors[k];
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

Json number_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::pair<std::string, std::optional<double>>> metric_fields(const SeedMetrics& m) {
  return {{"avg_acc", m.avg_acc},
          {"avg_of_avg", m.avg_of_avg},
          {"forgetting", m.forgetting},
          {"forward_transfer", m.forward_transfer}};
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

Stat mean_std(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double v = 0.0;
    for (double x : xs) v += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::vector<std::pair<std::string, Stat>> summarize(const std::vector<SeedMetrics>& ms) {
  std::vector<std::pair<std::string, Stat>> out;
  if (ms.empty()) return out;
  const auto names = metric_fields(ms.front());
  for (std::size_t f = 0; f < names.size(); ++f) {
    std::vector<double> xs;
    for (const auto& m : ms) {
      const auto v = metric_fields(m)[f].second;
      if (v) xs.push_back(*v);
    }
    if (!xs.empty()) out.emplace_back(names[f].first, mean_std(xs));
  }
  return out;
}

std::string csv_text(const std::string& dataset, const std::string& method,
                     const std::vector<std::pair<std::uint64_t, SeedMetrics>>& rows) {
  std::ostringstream os;
  os << "dataset,method,seed,metric,value\n";
  std::vector<SeedMetrics> ms;
  for (const auto& [seed, m] : rows) {
    ms.push_back(m);
    for (const auto& [name, v] : metric_fields(m)) {
      if (v) os << dataset << ',' << method << ',' << seed << ',' << name << ',' << format_double(*v) << '\n';
    }
  }
  for (const auto& [name, s] : summarize(ms)) {
    os << dataset << ',' << method << ",mean," << name << ',' << format_double(s.mean) << '\n';
    os << dataset << ',' << method << ",std," << name << ',' << format_double(s.std) << '\n';
  }
  return os.str();
}

Json metrics_json(const SeedMetrics& m) {
  Json j = Json::object();
  for (const auto& [name, v] : metric_fields(m)) j[name] = v ? Json(*v) : Json(nullptr);
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

std::string results_json(const RunConfig& cfg, const ExperimentOutcome& outcome) {
  Json j;
  j["schema"] = "udil.results/1";
  j["library"] = {{"name", "udil"}, {"version", "0.1.0"}};
  Json echo = Json::object();
  for (const auto& [k, e] : cfg.echo.entries()) echo[k] = e.value;
  j["config"] = echo;
  const TrainConfig& tc = cfg.train;
  j["resolved"] = {{"dataset", dataset_name(cfg.dataset.kind)},
                   {"method", std::string(method_name(tc.method.method))},
                   {"domains", cfg.dataset.domains},
                   {"buffer", tc.buffer_capacity},
                   {"lr", tc.sgd.learning_rate},
                   {"steps", tc.sgd.step_count},
                   {"batch", tc.sgd.batch_size},
                   {"lr_discriminator", tc.lr_d()},
                   {"lr_coefficients", tc.lr_omega()},
                   {"lambda_d", tc.hp.lambda_d},
                   {"C", tc.hp.C},
                   {"lambda_p", tc.hp.lambda_p},
                   {"lambda_s", tc.hp.lambda_s},
                   {"full_statistics", tc.full_statistics}};
  j["dataset_fingerprint"] = hex64(outcome.fingerprint);
  j["status"] = outcome.partial ? "partial" : "complete";
  if (outcome.partial) j["error"] = outcome.error;

  Json runs = Json::array();
  std::vector<SeedMetrics> ms;
  for (const auto& run : outcome.runs) {
    Json r;
    r["seed"] = run.seed;
    r["model_checksum"] = hex64(run.result.final_model.checksum());
    Json rows = Json::array();
    for (const auto& row : run.result.R.rows()) {
      Json jr = Json::array();
      for (double v : row) jr.push_back(number_or_null(v));
      rows.push_back(jr);
    }
    r["accuracy_matrix"] = rows;
    r["baseline"] = run.result.baseline;
    Json traj = Json::array();
    for (const Matrix& om : run.result.omega_trajectory) {
      Json jt = Json::array();
      for (Index i = 0; i < om.rows(); ++i) jt.push_back({om(i, 0), om(i, 1), om(i, 2)});
      traj.push_back(jt);
    }
    r["omega_trajectory"] = traj;
    Json shortfall = Json::array();
    for (const auto& log : run.result.logs) shortfall.push_back(log.memory_shortfall);
    r["memory_shortfall"] = shortfall;
    r["metrics"] = metrics_json(run.metrics);
    runs.push_back(r);
    ms.push_back(run.metrics);
  }
  j["runs"] = runs;
  Json summary = Json::object();
  for (const auto& [name, s] : summarize(ms)) summary[name] = {{"mean", s.mean}, {"std", s.std}};
  j["summary"] = summary;
  return j.dump(2) + "\n";
}

std::string metrics_csv(const RunConfig& cfg, const ExperimentOutcome& outcome) {
  std::vector<std::pair<std::uint64_t, SeedMetrics>> rows;
  for (const auto& run : outcome.runs) rows.emplace_back(run.seed, run.metrics);
  return csv_text(dataset_name(cfg.dataset.kind), std::string(method_name(cfg.train.method.method)), rows);
}

std::string metrics_csv_from_results(const std::filesystem::path& results_path) {
  Json j;
  try {
    j = Json::parse(read_text(results_path));
  } catch (const Json::parse_error& e) {
    throw FormatError(results_path.string() + ": " + e.what());
  }
  try {
    std::vector<std::pair<std::uint64_t, SeedMetrics>> rows;
    for (const auto& r : j.at("runs")) {
      std::vector<std::vector<double>> dense;
      for (const auto& row : r.at("accuracy_matrix")) {
        std::vector<double> d;
        for (const auto& v : row) d.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        dense.push_back(std::move(d));
      }
      const auto R = AccuracyMatrix::from_rows(dense);
      rows.emplace_back(r.at("seed").get<std::uint64_t>(),
                        compute_metrics(R, r.at("baseline").get<std::vector<double>>()));
    }
    const auto& res = j.at("resolved");
    return csv_text(res.at("dataset").get<std::string>(), res.at("method").get<std::string>(), rows);
  } catch (const Json::exception& e) {
    throw FormatError(results_path.string() + ": " + e.what());
  }
}

std::string reserialize_results(const std::string& text) { return Json::parse(text).dump(2) + "\n"; }

void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const DomainStream& stream,
                   const ExperimentOutcome& outcome) {
  std::filesystem::create_directories(dir);
  write_text(dir / "results.json", results_json(cfg, outcome));
  write_text(dir / "metrics.csv", metrics_csv(cfg, outcome));

  std::ostringstream om;
  om << "seed,t,domain,alpha,beta,gamma\n";
  for (const auto& run : outcome.runs) {
    for (std::size_t k = 0; k < run.result.omega_trajectory.size(); ++k) {
      const Matrix& w = run.result.omega_trajectory[k];
      for (Index i = 0; i < w.rows(); ++i) {
        om << run.seed << ',' << k + 2 << ',' << i + 1 << ',' << format_double(w(i, 0)) << ','
           << format_double(w(i, 1)) << ',' << format_double(w(i, 2)) << '\n';
      }
    }
  }
  write_text(dir / "omega.csv", om.str());

  if (cfg.export_embeddings) {
    std::ostringstream em;
    em << "seed,domain,label";
    for (std::size_t c = 0; c < cfg.train.arch.embed_dim; ++c) em << ",e" << c;
    em << '\n';
    for (const auto& run : outcome.runs) {
      for (const auto& d : stream.domains) {
        const std::size_t rows = std::min(cfg.embeddings_per_domain, d.test.size());
        const Matrix e = run.result.final_model.embed(d.test.inputs.topRows(static_cast<Index>(rows)));
        for (Index r = 0; r < e.rows(); ++r) {
          em << run.seed << ',' << d.test.domain_id << ',' << d.test.labels[static_cast<std::size_t>(r)];
          for (Index c = 0; c < e.cols(); ++c) em << ',' << format_double(e(r, c));
          em << '\n';
        }
      }
    }
    write_text(dir / "embeddings.csv", em.str());
  }

  Json timing = {{"wall_clock_seconds", outcome.seconds}, {"workers", cfg.workers}};
  write_text(dir / "timing.json", timing.dump(2) + "\n");
}

std::string bounds_report_json(const BoundsRunConfig& cfg, const BoundSuiteReport& rep) {
  Json j;
  j["schema"] = "udil.bounds/1";
  Json echo = Json::object();
  for (const auto& [k, e] : cfg.echo.entries()) echo[k] = e.value;
  j["config"] = echo;
  j["instances"] = cfg.suite.instances;
  Json checks = Json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name}, {"checks", c.checks}, {"violations", c.violations}, {"max_slack", c.max_slack}});
  }
  j["checks"] = checks;
  Json samples = Json::array();
  for (const auto& s : rep.argmin_samples) {
    Json om = Json::array();
    for (const auto& w : s) om.push_back({w.alpha, w.beta, w.gamma});
    samples.push_back(om);
  }
  j["tightest_bound"] = {{"instances", rep.grid_instances},
                         {"resolution", cfg.suite.grid_resolution},
                         {"violations", rep.grid_violations},
                         {"argmin_samples", samples}};
  j["erm_shape"] = {{"er_eq5", rep.erm_shape.er_eq5},
                    {"er_eq3", rep.erm_shape.er_eq3},
                    {"lwf_eq5", rep.erm_shape.lwf_eq5},
                    {"lwf_closed", rep.erm_shape.lwf_closed},
                    {"max_abs_diff", rep.erm_shape.max_abs_diff}};
  j["coefficient_descent"] = {{"instances", rep.descent_instances},
                              {"steps", cfg.suite.descent_steps},
                              {"worst_gap", rep.descent_instances ? Json(rep.descent_worst_gap) : Json(nullptr)},
                              {"tolerance", rep.descent_tolerance}};
  j["total_violations"] = rep.total_violations();
  return j.dump(2) + "\n";
}

}  // namespace udil
