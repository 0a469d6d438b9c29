#pragma once

// Flat experiment configuration.
//
// Grammar, one entry per line:
//   key = value        # trailing comment
//   # full-line comment
// Keys are case-insensitive identifiers, values run to the first '#' and are
// trimmed. Lists are comma-separated. Repeated or unknown keys are errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "udil/bounds.hpp"
#include "udil/trainer.hpp"

namespace udil {

struct ConfigEntry {
  std::string value;
  int line = 0;
};

class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "config");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, ConfigEntry>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& fallback) const;

  // ConfigError naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;
  [[noreturn]] void fail(const std::string& key, const std::string& why) const;

 private:
  std::string origin_;
  std::map<std::string, ConfigEntry> entries_;
};

enum class DatasetKind { kHdBalls, kPermutedMnist, kRotatedMnist };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kHdBalls;
  std::uint64_t data_seed = 0;
  int domains = 5;
  // HD-Balls
  int dim = 20;
  int points_per_domain = 500;
  double sigma = 0.2;
  // MNIST variants
  std::filesystem::path mnist_dir = "data/mnist";
  std::size_t train_per_domain = 0;
  std::size_t test_per_domain = 0;
  // Pre-generated stream (gen-data output); overrides generation when set.
  std::filesystem::path data_file;
};

std::string dataset_name(DatasetKind k);

struct RunConfig {
  DatasetConfig dataset;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "results";
  int workers = 1;
  bool export_embeddings = false;
  std::size_t embeddings_per_domain = 200;
  KeyValues echo;  // parsed entries, echoed into results
};

struct BoundsRunConfig {
  BoundSuiteConfig suite;
  std::filesystem::path output_dir = "results";
  KeyValues echo;
};

struct GenDataConfig {
  DatasetConfig dataset;
  std::filesystem::path output = "data/stream.bin";
};

// Throw ConfigError with the offending key and line.
RunConfig parse_run_config(const KeyValues& kv);
BoundsRunConfig parse_bounds_config(const KeyValues& kv);
GenDataConfig parse_gen_data_config(const KeyValues& kv);

// UDIL_OUTPUT_DIR, when set and nonempty, replaces the configured directory.
std::filesystem::path resolve_output_dir(const std::filesystem::path& configured);

}  // namespace udil
