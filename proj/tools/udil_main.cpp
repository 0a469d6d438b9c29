// udil: run experiments, verify bounds, generate data, recompute metrics.
//
// Exit codes: 0 success, 1 runtime failure or bound violation, 2 invalid
// configuration or usage.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "udil/bounds.hpp"
#include "udil/config.hpp"
#include "udil/errors.hpp"
#include "udil/experiment.hpp"

namespace {

namespace fs = std::filesystem;

int cmd_run(const std::string& config_path) {
  const udil::RunConfig cfg = udil::parse_run_config(udil::KeyValues::load(config_path));
  const udil::DomainStream stream = udil::load_stream(cfg.dataset);
  const fs::path dir = udil::resolve_output_dir(cfg.output_dir);
  const udil::ExperimentOutcome out = udil::run_experiment(cfg, stream);
  udil::write_outputs(dir, cfg, stream, out);

  std::cout << "dataset " << udil::dataset_name(cfg.dataset.kind) << ", method "
            << udil::method_name(cfg.train.method.method) << ", " << out.runs.size() << "/" << cfg.seeds.size()
            << " seeds, results in " << dir.string() << "\n";
  for (const auto& run : out.runs) {
    std::cout << "  seed " << run.seed << ": A_T=" << run.metrics.avg_acc;
    if (run.metrics.forgetting) std::cout << " F_T=" << *run.metrics.forgetting;
    if (run.metrics.forward_transfer) std::cout << " W_T=" << *run.metrics.forward_transfer;
    std::cout << "\n";
  }
  if (out.partial) {
    std::cerr << "error: run incomplete, partial results written: " << out.error << "\n";
    return 1;
  }
  return 0;
}

int cmd_verify_bounds(const std::string& config_path) {
  const udil::KeyValues kv = config_path.empty() ? udil::KeyValues::parse("", "defaults")
                                                 : udil::KeyValues::load(config_path);
  const udil::BoundsRunConfig cfg = udil::parse_bounds_config(kv);
  const udil::BoundSuiteReport rep = udil::run_bound_suite(cfg.suite);
  const fs::path dir = udil::resolve_output_dir(cfg.output_dir);
  fs::create_directories(dir);
  std::ofstream(dir / "bounds_report.json") << udil::bounds_report_json(cfg, rep);

  for (const auto& c : rep.checks) {
    std::cout << c.name << ": " << c.violations << " violations over " << c.checks
              << " checks, max slack " << c.max_slack << "\n";
  }
  std::cout << "tightest_bound: " << rep.grid_violations << " violations over " << rep.grid_instances
            << " instances\n";
  if (rep.descent_instances > 0) {
    std::cout << "coefficient_descent: worst gap to best preset " << rep.descent_worst_gap << " (tolerance "
              << rep.descent_tolerance << ")\n";
  }
  std::cerr << "verify-bounds finished in " << rep.seconds << " s\n";
  return rep.total_violations() == 0 ? 0 : 1;
}

int cmd_gen_data(const std::string& config_path) {
  const udil::GenDataConfig cfg = udil::parse_gen_data_config(udil::KeyValues::load(config_path));
  udil::DatasetConfig ds = cfg.dataset;
  ds.data_file.clear();
  const udil::DomainStream stream = udil::load_stream(ds);
  const fs::path out = cfg.output;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  udil::write_stream(stream, out);
  std::printf("wrote %zu domains to %s (fingerprint %016llx)\n", stream.size(), out.string().c_str(),
              static_cast<unsigned long long>(stream.fingerprint()));
  return 0;
}

int cmd_metrics(const std::string& results_path, const std::string& out_path) {
  const std::string csv = udil::metrics_csv_from_results(results_path);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified domain-incremental learning experiments"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Train every configured seed and write results");
  run->add_option("config", run_config, "Experiment config file")->required();

  std::string bounds_config;
  auto* verify = app.add_subcommand("verify-bounds", "Check the bound inequalities on random finite instances");
  verify->add_option("config", bounds_config, "Bounds config file (defaults when omitted)");

  std::string gen_config;
  auto* gen = app.add_subcommand("gen-data", "Materialize a domain stream to disk");
  gen->add_option("config", gen_config, "Dataset config file")->required();

  std::string results_path;
  std::string metrics_out;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics CSV from a results.json");
  metrics->add_option("results", results_path, "results.json of a previous run")->required();
  metrics->add_option("-o,--output", metrics_out, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_config);
    if (*verify) return cmd_verify_bounds(bounds_config);
    if (*gen) return cmd_gen_data(gen_config);
    if (*metrics) return cmd_metrics(results_path, metrics_out);
  } catch (const udil::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
