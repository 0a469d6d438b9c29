#include <doctest.h>

#include <cmath>
#include <set>

#include "udil/bounds.hpp"
#include "udil/errors.hpp"
#include "udil/losses.hpp"

using namespace udil;

namespace {

// Risks by counting over the sample, without the mass tables.
double count_err(const FiniteDomain& d, std::uint64_t h, std::uint64_t ref) {
  double wrong = 0.0;
  for (std::size_t x : d.sample) wrong += ((h >> x) & 1u) != ((ref >> x) & 1u) ? 1.0 : 0.0;
  return wrong / static_cast<double>(d.sample.size());
}

BoundInstance small_instance() {
  BoundInstance inst;
  inst.universe = 3;
  inst.domains = {{{0, 0, 1}, 0b011}, {{1, 2, 2, 2}, 0b110}, {{0, 2}, 0b111}};
  inst.hypotheses = {0b000, 0b001, 0b011, 0b111, 0b101};
  inst.h = 2;
  inst.h_prev = 4;
  inst.omega = {{0.2, 0.3, 0.5}, {0.0, 1.0, 0.0}};
  return inst;
}

}  // namespace

TEST_CASE("evaluator agrees with direct counting") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const BoundInstance inst = random_instance({}, rng);
    const InstanceEvaluator ev(inst);
    const auto H = inst.hypothesis_class();
    for (int i = 1; i <= inst.t(); ++i) {
      const auto& d = inst.domains[static_cast<std::size_t>(i - 1)];
      for (std::uint64_t h : inst.hypotheses) {
        CHECK(ev.err(i, h) == doctest::Approx(count_err(d, h, d.labels)).epsilon(1e-14));
        for (std::uint64_t g : inst.hypotheses) {
          CHECK(ev.err(i, h, g) == doctest::Approx(count_err(d, h, g)).epsilon(1e-14));
        }
      }
      CHECK(ev.divergence(i) == hdh_exact(H, d.sample, inst.domains.back().sample));
    }
    CHECK(ev.divergence(inst.t()) == 0.0);
  }
}

TEST_CASE("hand instance: unified bound value by substitution") {
  const BoundInstance inst = small_instance();
  const InstanceEvaluator ev(inst);
  const std::uint64_t h = 0b011, ref = 0b101;
  const auto& D = inst.domains;
  // Domain 1: points {0,0,1}; domain 2: {1,2,2,2}; domain 3: {0,2}.
  CHECK(count_err(D[0], h, D[0].labels) == 0.0);
  CHECK(count_err(D[1], h, D[1].labels) == doctest::Approx(0.75));
  const double d1 = ev.divergence(1), d2 = ev.divergence(2);
  const double expect = count_err(D[2], h, D[2].labels) +
                        (0.5 * count_err(D[0], h, D[0].labels) + 0.2 * count_err(D[0], h, ref) + 0.15 * d1 +
                         0.5 * count_err(D[0], ref, D[0].labels)) +
                        (0.5 * d2 + count_err(D[1], ref, D[1].labels)) + 1.3 * count_err(D[2], h, ref);
  CHECK(unified_bound_value(ev, inst, inst.omega) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("bounds hold on random instances and fail with the sign flipped") {
  Rng rng(8);
  std::size_t flipped = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const BoundInstance inst = random_instance({}, rng);
    CHECK(check_intra_bound(inst).violations == 0);
    CHECK(check_cross_bound(inst).violations == 0);
    CHECK(check_unified_bound(inst).violations == 0);
    CHECK(check_disagreement_gap(inst).violations == 0);
    flipped += check_cross_bound(inst, {true}).violations + check_unified_bound(inst, {true}).violations;
  }
  CHECK(flipped > 0);
}

TEST_CASE("grid minimum never loses to a preset") {
  Rng rng(17);
  std::set<std::string> skipped;
  for (int trial = 0; trial < 100; ++trial) {
    RandomInstanceSpec spec;
    spec.domains = 2 + trial % 4;
    const BoundInstance inst = random_instance(spec, rng);
    const GridReport g = tightest_bound_grid(inst, triple_presets(), 10);
    CHECK(g.violations == 0);
    for (const auto& [name, v] : g.preset_values) CHECK(g.grid_min <= v + 1e-9);
    for (const auto& w : g.argmin) CHECK(w.sum() == doctest::Approx(1.0));
    for (const auto& s : g.skipped_presets) skipped.insert(s);
    // Brute force over all grid points for the first past domain of t = 2.
    if (inst.t() == 2) {
      const InstanceEvaluator ev(inst);
      double best = 1e300;
      for (int a = 0; a <= 10; ++a) {
        for (int b = 0; a + b <= 10; ++b) {
          best = std::min(best, unified_bound_value(ev, inst, {{a / 10.0, b / 10.0, (10 - a - b) / 10.0}}));
        }
      }
      CHECK(g.grid_min == doctest::Approx(best).epsilon(1e-12));
    }
  }
  CHECK(skipped.count("ESM-ER") == 1);
  CHECK_THROWS_AS(tightest_bound_grid(small_instance(), triple_presets(), 1), ContractError);
}

TEST_CASE("radical argument special cases") {
  const std::vector<double> mem{20, 40, 80};
  const std::vector<CoeffTriple> lwf(3, {0, 1, 0});
  CHECK(radical_argument(lwf, 50, mem) == doctest::Approx(16.0 / 50));
  const std::vector<CoeffTriple> er(3, {0, 0, 1});
  CHECK(radical_argument(er, 50, mem) == doctest::Approx(1.0 / 50 + 1.0 / 20 + 1.0 / 40 + 1.0 / 80));
  const auto shape = check_erm_bound_shape(100, {10, 30}, 2.0);
  CHECK(shape.max_abs_diff <= 1e-15);
  CHECK(shape.lwf_closed == doctest::Approx(9.0 / 100));
  CHECK_THROWS_AS(radical_argument(er, 50, {1.0}), ContractError);
}

TEST_CASE("bound_stats feeds v_01 the deterministic bound plus the radical") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const BoundInstance inst = random_instance({}, rng);
    const InstanceEvaluator ev(inst);
    const BoundStats s = bound_stats(inst);
    Matrix omega(inst.t() - 1, 3);
    std::vector<double> n_mem;
    for (int i = 0; i < inst.t() - 1; ++i) {
      const auto& w = inst.omega[static_cast<std::size_t>(i)];
      omega.row(i) << w.alpha, w.beta, w.gamma;
      n_mem.push_back(static_cast<double>(inst.domains[static_cast<std::size_t>(i)].sample.size()));
    }
    const double n_t = static_cast<double>(inst.domains.back().sample.size());
    const double deterministic =
        unified_bound_value(ev, inst, inst.omega) - ev.err(inst.t(), inst.hypotheses[inst.h]);
    CHECK(v_01_value(omega, s, 0.0) == doctest::Approx(deterministic).epsilon(1e-12));
    CHECK(v_01_value(omega, s, 3.0) ==
          doctest::Approx(deterministic + 3.0 * std::sqrt(radical_argument(inst.omega, n_t, n_mem))).epsilon(1e-12));
  }
}

TEST_CASE("instance validation") {
  BoundInstance inst = small_instance();
  CHECK_NOTHROW(inst.validate());
  inst.omega[0] = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(inst.validate(), ContractError);
  inst = small_instance();
  inst.domains[0].sample.push_back(5);
  CHECK_THROWS_AS(inst.validate(), ContractError);
  inst = small_instance();
  inst.h = 9;
  CHECK_THROWS_AS(inst.validate(), ContractError);
}

TEST_CASE("suite runs clean and the hook trips it") {
  BoundSuiteConfig cfg;
  cfg.instances = 100;
  cfg.grid_instances = 20;
  cfg.descent_instances = 3;
  const BoundSuiteReport ok = run_bound_suite(cfg);
  CHECK(ok.total_violations() == 0);
  CHECK(ok.checks.size() == 4);
  CHECK(ok.descent_worst_gap <= 1e-3);
  cfg.options.flip_divergence_sign = true;
  CHECK(run_bound_suite(cfg).total_violations() > 0);
}
