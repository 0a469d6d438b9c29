#include "udil/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "udil/errors.hpp"

namespace udil {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::stringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string body = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key = lower(trim(std::string_view(body).substr(0, eq)));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line) + ": empty key");
    if (kv.entries_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "' repeated (first on line " +
                        std::to_string(kv.entries_[key].line) + ")");
    }
    kv.entries_[key] = {value, line};
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValues::fail(const std::string& key, const std::string& why) const {
  auto it = entries_.find(key);
  const std::string where = it == entries_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
  throw ConfigError(where + ": key '" + key + "': " + why);
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(key, "expected a number, got '" + v + "'");
  return out;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(key, "expected an integer, got '" + v + "'");
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string v = lower(it->second.value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected true/false, got '" + it->second.value + "'");
}

std::vector<long long> KeyValues::get_int_list(const std::string& key, const std::vector<long long>& fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<long long> out;
  for (const std::string& item : split_list(it->second.value)) {
    long long x = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc() || p != item.data() + item.size()) fail(key, "expected integers, got '" + item + "'");
    out.push_back(x);
  }
  return out;
}

void KeyValues::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [k, e] : entries_) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      std::string list;
      for (const auto& n : known) list += (list.empty() ? "" : ", ") + n;
      fail(k, "unknown key (known: " + list + ")");
    }
  }
}

std::string dataset_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kHdBalls: return "hd-balls";
    case DatasetKind::kPermutedMnist: return "p-mnist";
    case DatasetKind::kRotatedMnist: return "r-mnist";
  }
  return "?";
}

namespace {

const std::vector<std::string> kDatasetKeys{"dataset",          "data_seed",       "domains", "dim",
                                            "points_per_domain", "sigma",          "mnist_dir",
                                            "train_per_domain", "test_per_domain", "data_file"};

DatasetConfig parse_dataset(const KeyValues& kv) {
  DatasetConfig d;
  const std::string name = lower(kv.get_string("dataset", "hd-balls"));
  if (name == "hd-balls") {
    d.kind = DatasetKind::kHdBalls;
  } else if (name == "p-mnist") {
    d.kind = DatasetKind::kPermutedMnist;
  } else if (name == "r-mnist") {
    d.kind = DatasetKind::kRotatedMnist;
  } else {
    kv.fail("dataset", "unknown dataset '" + name + "' (valid: hd-balls, p-mnist, r-mnist)");
  }
  const long long seed = kv.get_int("data_seed", 0);
  if (seed < 0) kv.fail("data_seed", "must be >= 0");
  d.data_seed = static_cast<std::uint64_t>(seed);
  d.domains = static_cast<int>(kv.get_int("domains", 5));
  if (d.domains < 1) kv.fail("domains", "must be >= 1");
  d.dim = static_cast<int>(kv.get_int("dim", 20));
  if (d.dim < 2) kv.fail("dim", "must be >= 2");
  d.points_per_domain = static_cast<int>(kv.get_int("points_per_domain", 500));
  if (d.points_per_domain < 5) kv.fail("points_per_domain", "must be >= 5");
  d.sigma = kv.get_double("sigma", 0.2);
  if (!(d.sigma > 0.0)) kv.fail("sigma", "must be > 0");
  d.mnist_dir = kv.get_string("mnist_dir", "data/mnist");
  const long long trn = kv.get_int("train_per_domain", 0);
  const long long tst = kv.get_int("test_per_domain", 0);
  if (trn < 0) kv.fail("train_per_domain", "must be >= 0");
  if (tst < 0) kv.fail("test_per_domain", "must be >= 0");
  d.train_per_domain = static_cast<std::size_t>(trn);
  d.test_per_domain = static_cast<std::size_t>(tst);
  d.data_file = kv.get_string("data_file", "");
  return d;
}

std::vector<std::size_t> widths(const KeyValues& kv, const std::string& key, std::vector<std::size_t> fallback) {
  if (!kv.has(key)) return fallback;
  std::vector<std::size_t> out;
  if (lower(kv.get_string(key, "")) == "none") return out;
  for (long long w : kv.get_int_list(key, {})) {
    if (w < 1) kv.fail(key, "widths must be >= 1");
    out.push_back(static_cast<std::size_t>(w));
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const KeyValues& kv) {
  std::vector<std::string> known = kDatasetKeys;
  known.insert(known.end(), {"method", "lambda", "lambda_prime", "buffer", "lr", "steps", "batch",
                             "lr_discriminator", "lr_coefficients", "lambda_d", "c", "lambda_p", "lambda_s", "seeds",
                             "encoder_hidden", "embed_dim", "predictor_hidden", "discriminator_hidden",
                             "split_memory_batch", "full_statistics", "contrastive_negatives", "baseline_models", "output_dir",
                             "workers", "export_embeddings", "embeddings_per_domain"});
  kv.reject_unknown(known);

  RunConfig rc;
  rc.dataset = parse_dataset(kv);
  TrainConfig& tc = rc.train;

  const std::string m = kv.get_string("method", "UDIL");
  const auto method = parse_method(m);
  if (!method) kv.fail("method", "unknown method '" + m + "' (valid: " + valid_method_names() + ")");
  tc.method.method = *method;
  if (kv.has("lambda")) tc.method.lambda = kv.get_double("lambda", 0.0);
  if (kv.has("lambda_prime")) tc.method.lambda_prime = kv.get_double("lambda_prime", 0.0);
  // Surface preset conditions (ESM-ER at small t) before any training.
  const auto& presets = triple_presets();
  if (std::find(presets.begin(), presets.end(), tc.method.method) != presets.end()) {
    for (int t = 2; t <= rc.dataset.domains; ++t) {
      try {
        preset_triple(tc.method, t);
      } catch (const ConfigError& e) {
        kv.fail(kv.has("lambda_prime") ? "lambda_prime" : kv.has("lambda") ? "lambda" : "method", e.what());
      }
    }
  }

  const long long buffer = kv.get_int("buffer", 100);
  if (buffer < 1) kv.fail("buffer", "must be >= 1");
  tc.buffer_capacity = static_cast<std::size_t>(buffer);

  tc.sgd.learning_rate = kv.get_double("lr", tc.sgd.learning_rate);
  if (!(tc.sgd.learning_rate > 0.0)) kv.fail("lr", "must be > 0");
  tc.sgd.step_count = static_cast<int>(kv.get_int("steps", tc.sgd.step_count));
  if (tc.sgd.step_count < 1) kv.fail("steps", "must be >= 1");
  tc.sgd.batch_size = static_cast<int>(kv.get_int("batch", tc.sgd.batch_size));
  if (tc.sgd.batch_size < 1) kv.fail("batch", "must be >= 1");
  if (kv.has("lr_discriminator")) {
    tc.lr_discriminator = kv.get_double("lr_discriminator", 0.0);
    if (!(*tc.lr_discriminator > 0.0)) kv.fail("lr_discriminator", "must be > 0");
  }
  if (kv.has("lr_coefficients")) {
    tc.lr_coefficients = kv.get_double("lr_coefficients", 0.0);
    if (!(*tc.lr_coefficients > 0.0)) kv.fail("lr_coefficients", "must be > 0");
  }

  // Presets model existing methods, which have no discriminator.
  const double lambda_d_default = tc.method.method == Method::kUdil ? 1.0 : 0.0;
  tc.hp.lambda_d = kv.get_double("lambda_d", lambda_d_default);
  tc.hp.C = kv.get_double("c", 1.0);
  tc.hp.lambda_p = kv.get_double("lambda_p", 0.0);
  tc.hp.lambda_s = kv.get_double("lambda_s", 0.0);
  for (const char* k : {"lambda_d", "c", "lambda_p", "lambda_s"}) {
    if (!(kv.get_double(k, 0.0) >= 0.0)) kv.fail(k, "must be >= 0");
  }

  const auto seeds = kv.get_int_list("seeds", {0});
  if (seeds.empty()) kv.fail("seeds", "must list at least one seed");
  rc.seeds.clear();
  for (long long s : seeds) {
    if (s < 0) kv.fail("seeds", "seeds must be >= 0");
    rc.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  tc.arch.encoder_hidden = widths(kv, "encoder_hidden", tc.arch.encoder_hidden);
  const long long embed = kv.get_int("embed_dim", static_cast<long long>(tc.arch.embed_dim));
  if (embed < 1) kv.fail("embed_dim", "must be >= 1");
  tc.arch.embed_dim = static_cast<std::size_t>(embed);
  tc.arch.predictor_hidden = widths(kv, "predictor_hidden", tc.arch.predictor_hidden);
  tc.arch.discriminator_hidden = widths(kv, "discriminator_hidden", tc.arch.discriminator_hidden);

  tc.split_memory_batch = kv.get_bool("split_memory_batch", false);
  tc.full_statistics = kv.get_bool("full_statistics", false);
  const long long neg = kv.get_int("contrastive_negatives", 8);
  if (neg < 1) kv.fail("contrastive_negatives", "must be >= 1");
  tc.contrastive_negatives = static_cast<std::size_t>(neg);
  tc.baseline_models = static_cast<int>(kv.get_int("baseline_models", 5));
  if (tc.baseline_models < 1) kv.fail("baseline_models", "must be >= 1");

  rc.output_dir = kv.get_string("output_dir", "results");
  rc.workers = static_cast<int>(kv.get_int("workers", 1));
  if (rc.workers < 1) kv.fail("workers", "must be >= 1");
  rc.export_embeddings = kv.get_bool("export_embeddings", false);
  const long long epd = kv.get_int("embeddings_per_domain", 200);
  if (epd < 1) kv.fail("embeddings_per_domain", "must be >= 1");
  rc.embeddings_per_domain = static_cast<std::size_t>(epd);
  rc.echo = kv;
  return rc;
}

BoundsRunConfig parse_bounds_config(const KeyValues& kv) {
  kv.reject_unknown({"seed", "instances", "grid_instances", "grid_resolution", "min_points", "max_points", "domains",
                     "max_hypotheses", "max_sample", "c", "descent_steps", "descent_lr", "descent_instances",
                     "inject_sign_flip", "output_dir"});
  BoundsRunConfig bc;
  BoundSuiteConfig& s = bc.suite;
  auto nonneg = [&](const char* key, long long fallback) {
    const long long v = kv.get_int(key, fallback);
    if (v < 0) kv.fail(key, "must be >= 0");
    return v;
  };
  s.seed = static_cast<std::uint64_t>(nonneg("seed", 0));
  s.instances = static_cast<std::size_t>(nonneg("instances", 1000));
  s.grid_instances = static_cast<std::size_t>(nonneg("grid_instances", 100));
  s.grid_resolution = static_cast<int>(kv.get_int("grid_resolution", 10));
  if (s.grid_resolution < 2) kv.fail("grid_resolution", "must be >= 2");
  s.instance.min_points = static_cast<std::size_t>(nonneg("min_points", 2));
  s.instance.max_points = static_cast<std::size_t>(nonneg("max_points", 8));
  if (s.instance.min_points < 1) kv.fail("min_points", "must be >= 1");
  if (s.instance.max_points > 8 || s.instance.max_points < s.instance.min_points) {
    kv.fail("max_points", "must lie in [min_points, 8]");
  }
  s.instance.domains = static_cast<int>(kv.get_int("domains", 3));
  if (s.instance.domains < 2) kv.fail("domains", "must be >= 2");
  s.instance.max_hypotheses = static_cast<std::size_t>(nonneg("max_hypotheses", 256));
  if (s.instance.max_hypotheses < 1 || s.instance.max_hypotheses > 256) kv.fail("max_hypotheses", "must lie in [1, 256]");
  s.instance.max_sample = static_cast<std::size_t>(nonneg("max_sample", 12));
  if (s.instance.max_sample < 1) kv.fail("max_sample", "must be >= 1");
  s.C = kv.get_double("c", 1.0);
  if (!(s.C >= 0.0)) kv.fail("c", "must be >= 0");
  s.descent_steps = static_cast<int>(nonneg("descent_steps", 500));
  s.descent_lr = kv.get_double("descent_lr", 50.0);
  if (!(s.descent_lr > 0.0)) kv.fail("descent_lr", "must be > 0");
  s.descent_instances = static_cast<std::size_t>(nonneg("descent_instances", 10));
  s.options.flip_divergence_sign = kv.get_bool("inject_sign_flip", false);
  bc.output_dir = kv.get_string("output_dir", "results");
  bc.echo = kv;
  return bc;
}

GenDataConfig parse_gen_data_config(const KeyValues& kv) {
  std::vector<std::string> known = kDatasetKeys;
  known.push_back("output");
  kv.reject_unknown(known);
  GenDataConfig g;
  g.dataset = parse_dataset(kv);
  g.output = kv.get_string("output", "data/stream.bin");
  return g;
}

std::filesystem::path resolve_output_dir(const std::filesystem::path& configured) {
  const char* env = std::getenv("UDIL_OUTPUT_DIR");
  if (env != nullptr && *env != '\0') return env;
  return configured;
}

}  // namespace udil
