#include <doctest.h>

#include <random>

#include "loss_trials.hpp"
#include "udil/errors.hpp"
#include "udil/trainer.hpp"

using namespace udil;

namespace {

// Class 0 and 1 as tight 2-D blobs. Domain 2 reuses the orientation
// flipped and shifted up, so a model fit on domain 2 alone inverts domain 1
// while one network can still solve both.
LabeledSet blobs(int domain_id, double y, bool flipped, std::size_t n, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.5);
  LabeledSet s;
  s.domain_id = domain_id;
  s.num_classes = 2;
  s.inputs.resize(static_cast<Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double x = (label == 1) != flipped ? 2.0 : -2.0;
    s.inputs(static_cast<Index>(i), 0) = x + noise(rng);
    s.inputs(static_cast<Index>(i), 1) = y + noise(rng);
    s.labels.push_back(label);
  }
  return s;
}

DomainStream toy_stream(std::uint64_t seed) {
  Rng rng(seed);
  DomainStream s;
  s.num_classes = 2;
  s.input_dim = 2;
  s.domains.push_back({blobs(1, 0.0, false, 400, rng), blobs(1, 0.0, false, 200, rng)});
  s.domains.push_back({blobs(2, 4.0, true, 400, rng), blobs(2, 4.0, true, 200, rng)});
  return s;
}

TrainConfig toy_config(Method m) {
  TrainConfig cfg;
  cfg.method = m;
  cfg.sgd = {0.05, 300, 32};
  cfg.arch.encoder_hidden = {16};
  cfg.arch.embed_dim = 8;
  cfg.arch.discriminator_hidden = {8};
  cfg.buffer_capacity = 50;
  cfg.baseline_models = 2;
  cfg.hp.lambda_d = m == Method::kUdil ? 0.1 : 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("domain 1 is plain ERM for every method") {
  const DomainStream s = toy_stream(1);
  std::uint64_t reference = 0;
  for (Method m : {Method::kUdil, Method::kFineTune, Method::kEr, Method::kDerpp}) {
    const TrainConfig cfg = toy_config(m);
    TrainState st = make_state(cfg, 2, 2, 42);
    begin_domain(st, cfg, 1);
    train_domain(st, cfg, s.domains[0].train);
    CHECK(st.discriminator.layers().empty());
    CHECK(st.omega.past_domains() == 0);
    if (reference == 0) reference = st.model.checksum();
    CHECK(st.model.checksum() == reference);
    CHECK(accuracy(st.model, s.domains[0].test) >= 0.95);
  }
}

TEST_CASE("replay updates keep each line to its own parameters") {
  const DomainStream s = toy_stream(2);
  TrainConfig cfg = toy_config(Method::kUdil);
  cfg.check_isolation = true;
  cfg.hp.lambda_p = 0.5;
  cfg.hp.lambda_s = 0.1;
  cfg.sgd.step_count = 30;
  CHECK_NOTHROW(run_sequence(s, cfg, 3));

  CoeffSimplex omega = init_uniform(3);
  Rng rng(1);
  const BoundStats stats = testing::random_bound_stats(3, rng);
  const Matrix before = omega.materialize_matrix();
  coefficient_step(omega, stats, 1.0, 0.5);
  CHECK_FALSE(omega.materialize_matrix().isApprox(before));
}

TEST_CASE("full-set statistics drive the coefficient step") {
  const DomainStream s = toy_stream(2);
  TrainConfig cfg = toy_config(Method::kUdil);
  cfg.sgd.step_count = 30;
  cfg.check_isolation = true;
  const RunResult mini = run_sequence(s, cfg, 3);
  cfg.full_statistics = true;
  const RunResult full = run_sequence(s, cfg, 3);
  const Matrix& w = full.omega_trajectory.front();
  CHECK(w.rows() == 1);
  CHECK(w.sum() == doctest::Approx(1.0));
  CHECK_FALSE(w.isApprox(mini.omega_trajectory.front()));
}

TEST_CASE("history snapshot is a deep copy with cached memory risk") {
  const DomainStream s = toy_stream(3);
  const TrainConfig cfg = toy_config(Method::kEr);
  TrainState st = make_state(cfg, 2, 2, 7);
  begin_domain(st, cfg, 1);
  DomainLog log = train_domain(st, cfg, s.domains[0].train);
  end_domain(st, cfg, s.domains[0].train, log);
  REQUIRE(st.history.has_value());
  const std::uint64_t frozen = st.history->model.checksum();
  CHECK(st.history->memory_risk.at(1) == doctest::Approx(erm01(st.model, st.bank.bucket(1))));
  st.model.encoder.layers()[0].weight.data().array() += 1.0;
  CHECK(st.history->model.checksum() == frozen);
  CHECK(st.model.checksum() != frozen);
  CHECK(st.bank.bucket(1).size() == 50);
}

TEST_CASE("replay protects the first domain where fine-tuning forgets it") {
  const DomainStream s = toy_stream(4);
  const RunResult udil = run_sequence(s, toy_config(Method::kUdil), 11);
  const RunResult ft = run_sequence(s, toy_config(Method::kFineTune), 11);
  CHECK(udil.R.at(1, 1) >= 0.95);
  CHECK(udil.R.at(2, 1) >= 0.9);
  CHECK(ft.R.at(2, 1) < 0.7);
  CHECK(udil.R.at(2, 2) >= 0.9);
  CHECK(udil.omega_trajectory.size() == 1);
  CHECK(ft.omega_trajectory.front().rows() == 0);
}

TEST_CASE("run_sequence fills the superdiagonal and baseline, deterministically") {
  const DomainStream s = toy_stream(5);
  TrainConfig cfg = toy_config(Method::kUdil);
  cfg.sgd.step_count = 40;
  const RunResult a = run_sequence(s, cfg, 9);
  const RunResult b = run_sequence(s, cfg, 9);
  CHECK(a.R.has(1, 2));
  CHECK(a.baseline.size() == 2);
  for (double r : a.baseline) CHECK((r >= 0.0 && r <= 1.0));
  CHECK(a.R == b.R);
  CHECK(a.final_model.checksum() == b.final_model.checksum());
  CHECK(a.omega_trajectory.front() == b.omega_trajectory.front());
  const RunResult c = run_sequence(s, cfg, 10);
  CHECK(c.final_model.checksum() != a.final_model.checksum());
}

TEST_CASE("joint mode trains on the union of seen domains") {
  const DomainStream s = toy_stream(6);
  const TrainConfig cfg = toy_config(Method::kJoint);
  TrainState st = make_state(cfg, 2, 2, 1);
  for (int t = 1; t <= 2; ++t) {
    begin_domain(st, cfg, t);
    DomainLog log = train_domain(st, cfg, s.domains[static_cast<std::size_t>(t - 1)].train);
    end_domain(st, cfg, s.domains[static_cast<std::size_t>(t - 1)].train, log);
    CHECK(st.joint_pool.size() == 400u * static_cast<std::size_t>(t));
  }
  CHECK(accuracy(st.model, s.domains[0].test) >= 0.9);
  CHECK(accuracy(st.model, s.domains[1].test) >= 0.9);
}

TEST_CASE("lifecycle contract") {
  const DomainStream s = toy_stream(7);
  const TrainConfig cfg = toy_config(Method::kUdil);
  TrainState st = make_state(cfg, 2, 2, 1);
  CHECK_THROWS_AS(begin_domain(st, cfg, 2), ContractError);
  begin_domain(st, cfg, 1);
  CHECK_THROWS_AS(train_domain(st, cfg, s.domains[1].train), ContractError);
  CHECK_THROWS_AS(grow_discriminator(cfg.arch, 1, st.init_rng), ContractError);
  CHECK(grow_discriminator(cfg.arch, 4, st.init_rng).out_dim() == 4);
  TrainConfig bad = cfg;
  bad.arch.embed_dim = 0;
  CHECK_THROWS_AS(make_state(bad, 2, 2, 1), ConfigError);
}

TEST_CASE("coefficient descent reaches the best preset") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int t = 3 + trial % 3;
    const BoundStats stats = testing::random_bound_stats(t, rng);
    const CoeffGapReport rep = coefficient_descent_gap(stats, t, 1.0, 500, 50.0);
    CHECK(rep.gap <= 1e-3);
    CHECK_FALSE(rep.best_preset.empty());
    for (Index r = 0; r < rep.omega.rows(); ++r) CHECK(rep.omega.row(r).sum() == doctest::Approx(1.0));
  }
}
