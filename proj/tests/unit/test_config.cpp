#include <doctest.h>

#include <cstdlib>
#include <string>

#include "udil/config.hpp"
#include "udil/errors.hpp"

using namespace udil;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(KeyValues::parse(text, "run.conf"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("grammar: comments, case, whitespace") {
  const auto kv = KeyValues::parse("# header\n  Method = ER   # trailing\n\nSEEDS=1, 2 ,3\n", "x");
  CHECK(kv.get_string("method", "") == "ER");
  CHECK(kv.get_int_list("seeds", {}) == std::vector<long long>{1, 2, 3});
  CHECK(kv.entries().at("seeds").line == 4);
  CHECK_FALSE(kv.has("lr"));
  CHECK(kv.get_double("lr", 0.5) == 0.5);
}

TEST_CASE("grammar errors carry origin and line") {
  try {
    KeyValues::parse("a = 1\nb\n", "f.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f.conf:2") == 0);
  }
  try {
    KeyValues::parse("a = 1\nA = 2\n", "f.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("repeated") != std::string::npos);
  }
  CHECK_THROWS_AS(KeyValues::load("/nonexistent/udil.conf"), ConfigError);
}

TEST_CASE("field-level errors name the key") {
  CHECK(error_of("lr = fast\n").find("run.conf:1: key 'lr'") == 0);
  CHECK(error_of("buffer = 0\n").find("key 'buffer'") != std::string::npos);
  CHECK(error_of("methd = ER\n").find("key 'methd': unknown key") != std::string::npos);
  CHECK(error_of("method = EWC\n").find("valid: ") != std::string::npos);
  CHECK(error_of("dataset = cifar\n").find("key 'dataset'") != std::string::npos);
  CHECK(error_of("lambda_d = -1\n").find("key 'lambda_d'") != std::string::npos);
  CHECK(error_of("seeds = 1,x\n").find("key 'seeds'") != std::string::npos);
  CHECK(error_of("split_memory_batch = maybe\n").find("key 'split_memory_batch'") != std::string::npos);
  CHECK(error_of("method = UDIL\nlr = 0.1\n").empty());
}

TEST_CASE("run config defaults and overrides") {
  const RunConfig d = parse_run_config(KeyValues::parse(""));
  CHECK(d.train.method.method == Method::kUdil);
  CHECK(d.train.hp.lambda_d == 1.0);
  CHECK(d.train.hp.C == 1.0);
  CHECK(d.seeds == std::vector<std::uint64_t>{0});
  CHECK(d.dataset.kind == DatasetKind::kHdBalls);
  CHECK_FALSE(d.train.full_statistics);
  CHECK(parse_run_config(KeyValues::parse("full_statistics = true\n")).train.full_statistics);

  const RunConfig er = parse_run_config(KeyValues::parse("method = er\n"));
  CHECK(er.train.method.method == Method::kEr);
  CHECK(er.train.hp.lambda_d == 0.0);

  const RunConfig r = parse_run_config(KeyValues::parse(
      "dataset = r-mnist\nmethod = CLS-ER\nlambda = 2\nsteps = 7\nbatch = 3\nlr = 0.2\nlr_coefficients = 4\n"
      "encoder_hidden = 10, 20\npredictor_hidden = none\nembed_dim = 5\nseeds = 4,5\nworkers = 2\n"
      "train_per_domain = 100\nc = 3\n"));
  CHECK(r.dataset.kind == DatasetKind::kRotatedMnist);
  CHECK(r.train.method.lambda == 2.0);
  CHECK(r.train.sgd.step_count == 7);
  CHECK(r.train.sgd.batch_size == 3);
  CHECK(r.train.lr_omega() == 4.0);
  CHECK(r.train.lr_d() == 0.2);
  CHECK(r.train.arch.encoder_hidden == std::vector<std::size_t>{10, 20});
  CHECK(r.train.arch.predictor_hidden.empty());
  CHECK(r.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(r.workers == 2);
  CHECK(r.dataset.train_per_domain == 100);
  CHECK(r.train.hp.C == 3.0);
}

TEST_CASE("bounds and gen-data configs") {
  const BoundsRunConfig b = parse_bounds_config(KeyValues::parse("instances = 5\ninject_sign_flip = true\n"));
  CHECK(b.suite.instances == 5);
  CHECK(b.suite.grid_instances == 100);
  CHECK(b.suite.options.flip_divergence_sign);
  CHECK_THROWS_AS(parse_bounds_config(KeyValues::parse("max_points = 9\n")), ConfigError);
  CHECK_THROWS_AS(parse_bounds_config(KeyValues::parse("lr = 1\n")), ConfigError);
  const GenDataConfig g = parse_gen_data_config(KeyValues::parse("output = x.bin\ndim = 7\n"));
  CHECK(g.output == "x.bin");
  CHECK(g.dataset.dim == 7);
  CHECK_THROWS_AS(parse_gen_data_config(KeyValues::parse("method = ER\n")), ConfigError);
}

TEST_CASE("output directory override") {
  ::setenv("UDIL_OUTPUT_DIR", "/tmp/override", 1);
  CHECK(resolve_output_dir("results") == "/tmp/override");
  ::setenv("UDIL_OUTPUT_DIR", "", 1);
  CHECK(resolve_output_dir("results") == "results");
  ::unsetenv("UDIL_OUTPUT_DIR");
  CHECK(resolve_output_dir("out") == "out");
}

TEST_CASE("preset conditions are checked at parse time") {
  const std::string esm = error_of("method = ESM-ER\ndomains = 5\n");
  CHECK(esm.find("key 'method'") != std::string::npos);
  CHECK(esm.find("lambda' = r(t-1) - 1 >= 0 violated at t = 2") != std::string::npos);
  CHECK(error_of("method = ESM-ER\ndomains = 1\n").empty());
  CHECK(error_of("method = ESM-ER\nlambda_prime = 0.5\n").empty());
  CHECK(error_of("method = CLS-ER\nlambda = -1\n").find("key 'lambda'") != std::string::npos);
}
