#pragma once

// Experiment runner and persistence.
//
// Output directory layout of `run`:
//   results.json   config echo, dataset fingerprint, per-seed accuracy
//                  matrices, baselines, Omega trajectories, metrics, summary
//   metrics.csv    header "dataset,method,seed,metric,value"; one row per
//                  seed per metric plus "mean" and "std" rows
//   omega.csv      header "seed,t,domain,alpha,beta,gamma"
//   embeddings.csv optional; header "seed,domain,label,e0,e1,..."
//   timing.json    wall-clock seconds (kept apart so results.json is
//                  bitwise reproducible)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "udil/bounds.hpp"
#include "udil/config.hpp"
#include "udil/data.hpp"
#include "udil/trainer.hpp"

namespace udil {

// Generates or loads the configured stream. MNIST variants read
// train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte
// and t10k-labels-idx1-ubyte from `mnist_dir`.
DomainStream load_stream(const DatasetConfig& cfg);

struct SeedMetrics {
  double avg_acc = 0.0;                    // A_T
  double avg_of_avg = 0.0;                 // A_{1:T}
  std::optional<double> forgetting;        // F_T, T >= 2
  std::optional<double> forward_transfer;  // W_T, T >= 2
};

SeedMetrics compute_metrics(const AccuracyMatrix& R, const std::vector<double>& baseline);

struct SeedRun {
  std::uint64_t seed = 0;
  RunResult result;
  SeedMetrics metrics;
};

struct ExperimentOutcome {
  std::vector<SeedRun> runs;       // completed seeds, in config order
  std::uint64_t fingerprint = 0;
  bool partial = false;
  std::string error;
  double seconds = 0.0;
};

// Runs every seed (on `cfg.workers` threads; results merged in seed order).
// A failing seed marks the outcome partial instead of throwing.
ExperimentOutcome run_experiment(const RunConfig& cfg, const DomainStream& stream);

// Writes the files listed above into `dir` (created if missing).
void write_outputs(const std::filesystem::path& dir, const RunConfig& cfg, const DomainStream& stream,
                   const ExperimentOutcome& outcome);

// Serialized forms, exposed for round-trip checks.
std::string results_json(const RunConfig& cfg, const ExperimentOutcome& outcome);
std::string metrics_csv(const RunConfig& cfg, const ExperimentOutcome& outcome);

// Recomputes metrics.csv content from a stored results.json.
std::string metrics_csv_from_results(const std::filesystem::path& results_path);
// Parses and re-serializes a results.json text.
std::string reserialize_results(const std::string& text);

// verify-bounds report as JSON text: per-check violation counts and max
// slack, grid summary, argmin samples, bookkeeping and descent checks.
std::string bounds_report_json(const BoundsRunConfig& cfg, const BoundSuiteReport& rep);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace udil
