#pragma once

// Executable checks of the replay bounds on finite instances.
//
// Regime: each domain is an empirical distribution over a shared universe of
// at most 16 points, treated as the true distribution, so every risk and the
// HΔH-divergence are exact sums and the deterministic inequalities can be
// checked with no generalization gap. Hypotheses are explicit labelings.

#include <cstdint>
#include <string>
#include <vector>

#include "udil/coeffs.hpp"
#include "udil/divergence.hpp"
#include "udil/losses.hpp"
#include "udil/rng.hpp"

namespace udil {

struct FiniteDomain {
  std::vector<std::size_t> sample;  // multiset of universe indices
  std::uint64_t labels = 0;         // bit x = f_i(x)
};

// Domains 1..t; the last one is the current domain t.
struct BoundInstance {
  std::size_t universe = 0;         // ground-set size (<= 16)
  std::vector<FiniteDomain> domains;
  std::vector<std::uint64_t> hypotheses;  // explicit labelings, bit x = h(x)
  std::size_t h = 0;                // index of h in `hypotheses`
  std::size_t h_prev = 0;           // index of H_{t-1}
  std::vector<CoeffTriple> omega;   // one triple per past domain

  int t() const { return static_cast<int>(domains.size()); }
  FiniteHypothesisClass hypothesis_class() const;
  // ContractError on an inconsistent instance.
  void validate() const;
};

struct CheckReport {
  std::string name;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double max_slack = -1e300;  // max of lhs - rhs over all checks

  void record(double lhs, double rhs, double tol);
  void merge(const CheckReport& other);
};

inline constexpr double kBoundTolerance = 1e-12;

// Exact quantities of an instance.
class InstanceEvaluator {
 public:
  explicit InstanceEvaluator(const BoundInstance& inst);

  // P_i[mask], with domain index i in 1..t.
  double mass(int i, std::uint64_t mask) const;
  double err(int i, std::uint64_t h) const { return mass(i, h ^ inst_->domains[i - 1].labels); }
  double err(int i, std::uint64_t h, std::uint64_t ref) const { return mass(i, h ^ ref); }
  // hdh_exact(H, D_i, D_t), cached.
  double divergence(int i) const { return div_[static_cast<std::size_t>(i - 1)]; }

 private:
  const BoundInstance* inst_;
  std::vector<std::vector<double>> mass_;  // per domain, per mask
  std::vector<double> div_;
};

// Test hook: negates the divergence term of the cross-domain and unified
// checks, which must then report violations.
struct CheckOptions {
  bool flip_divergence_sign = false;
};

// eps_i(h) <= eps_i(h, H') + eps_i(H') for every pair and past domain i.
CheckReport check_intra_bound(const BoundInstance& inst);
// eps_i(h) <= eps_t(h, H') + d_i / 2 + eps_i(H') for every pair and i < t.
CheckReport check_cross_bound(const BoundInstance& inst, const CheckOptions& opt = {});
// sum_{i<=t} eps_i(h) <= g(Omega; h, H') for every pair, with g the
// deterministic part of the unified bound.
CheckReport check_unified_bound(const BoundInstance& inst, const CheckOptions& opt = {});
// |eps_P(h,h') - eps_Q(h,h')| <= hdh_exact / 2 for every pair and i < t.
CheckReport check_disagreement_gap(const BoundInstance& inst);

// Deterministic part of the unified bound at (inst.h, inst.h_prev).
double unified_bound_value(const InstanceEvaluator& ev, const BoundInstance& inst,
                           const std::vector<CoeffTriple>& omega, double divergence_sign = 1.0);

struct GridReport {
  int resolution = 0;
  double grid_min = 0.0;
  std::vector<CoeffTriple> argmin;
  std::vector<std::pair<std::string, double>> preset_values;  // applicable presets only
  std::vector<std::string> skipped_presets;                   // preset rejected at this t
  std::size_t violations = 0;                                  // presets beating the grid
};

// Minimizes the deterministic bound over the simplex grid
// {(a,b,c)/resolution : a+b+c = resolution} per past domain (the bound is
// separable across domains) and compares against every preset at t.
GridReport tightest_bound_grid(const BoundInstance& inst, const std::vector<Method>& presets, int resolution,
                               double tol = 1e-9);

struct ErmShapeReport {
  double er_eq5 = 0.0;    // (1 + sum beta)^2 / N_t + sum (gamma + alpha)^2 / N~_i at ER
  double er_eq3 = 0.0;    // 1 / N_t + sum 1 / N~_i
  double lwf_eq5 = 0.0;   // at LwF
  double lwf_closed = 0.0;  // t^2 / N_t
  double max_abs_diff = 0.0;
};

// Radical bookkeeping of the generalization term. Sizes are N_t and N~_i.
double radical_argument(const std::vector<CoeffTriple>& omega, double n_current, const std::vector<double>& n_memory);
ErmShapeReport check_erm_bound_shape(double n_current, const std::vector<double>& n_memory, double C);

// Exact statistics consumed by v_01, evaluated at (inst.h, inst.h_prev).
BoundStats bound_stats(const BoundInstance& inst);

struct RandomInstanceSpec {
  std::size_t min_points = 2;
  std::size_t max_points = 8;
  int domains = 3;                  // t
  std::size_t max_hypotheses = 256;
  std::size_t max_sample = 12;      // per-domain sample size drawn in [1, max_sample]
};

BoundInstance random_instance(const RandomInstanceSpec& spec, Rng& rng);

struct BoundSuiteConfig {
  std::uint64_t seed = 0;
  std::size_t instances = 1000;
  std::size_t grid_instances = 100;
  int grid_resolution = 10;
  RandomInstanceSpec instance;
  double C = 1.0;
  int descent_steps = 500;
  double descent_lr = 50.0;
  std::size_t descent_instances = 10;
  CheckOptions options;
};

struct BoundSuiteReport {
  std::vector<CheckReport> checks;  // intra, cross, unified, disagreement gap
  std::size_t grid_instances = 0;
  std::size_t grid_violations = 0;
  std::vector<std::vector<CoeffTriple>> argmin_samples;
  ErmShapeReport erm_shape;
  std::size_t descent_instances = 0;
  double descent_worst_gap = -1e300;  // max over instances of V01(descent) - min preset V01
  double descent_tolerance = 1e-3;
  double seconds = 0.0;

  std::size_t total_violations() const;
};

BoundSuiteReport run_bound_suite(const BoundSuiteConfig& cfg);

}  // namespace udil
