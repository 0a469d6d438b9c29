#include "udil/bounds.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <limits>

#include "udil/errors.hpp"
#include "udil/trainer.hpp"

namespace udil {

FiniteHypothesisClass BoundInstance::hypothesis_class() const {
  std::vector<std::vector<std::uint64_t>> bits;
  bits.reserve(hypotheses.size());
  for (std::uint64_t m : hypotheses) bits.push_back({m});
  return FiniteHypothesisClass(universe, std::move(bits));
}

void BoundInstance::validate() const {
  if (universe == 0 || universe > 16) throw ContractError("BoundInstance: universe must have 1..16 points");
  if (domains.empty()) throw ContractError("BoundInstance: no domains");
  if (hypotheses.empty()) throw ContractError("BoundInstance: empty hypothesis class");
  if (h >= hypotheses.size() || h_prev >= hypotheses.size()) {
    throw ContractError("BoundInstance: h and H_prev must belong to the class");
  }
  if (omega.size() + 1 != domains.size()) throw ContractError("BoundInstance: need one triple per past domain");
  for (const auto& w : omega) {
    if (w.alpha < 0 || w.beta < 0 || w.gamma < 0 || std::abs(w.sum() - 1.0) > 1e-9) {
      throw ContractError("BoundInstance: omega off the simplex");
    }
  }
  const std::uint64_t full = (std::uint64_t{1} << universe) - 1;
  for (const auto& d : domains) {
    if (d.sample.empty()) throw ContractError("BoundInstance: empty domain sample");
    if ((d.labels & ~full) != 0) throw ContractError("BoundInstance: labels outside universe");
    for (std::size_t x : d.sample) {
      if (x >= universe) throw ContractError("BoundInstance: sample point outside universe");
    }
  }
  for (std::uint64_t m : hypotheses) {
    if ((m & ~full) != 0) throw ContractError("BoundInstance: hypothesis outside universe");
  }
}

void CheckReport::record(double lhs, double rhs, double tol) {
  ++checks;
  const double slack = lhs - rhs;
  max_slack = std::max(max_slack, slack);
  if (slack > tol) ++violations;
}

void CheckReport::merge(const CheckReport& other) {
  checks += other.checks;
  violations += other.violations;
  max_slack = std::max(max_slack, other.max_slack);
}

InstanceEvaluator::InstanceEvaluator(const BoundInstance& inst) : inst_(&inst) {
  inst.validate();
  const std::size_t masks = std::size_t{1} << inst.universe;
  const auto H = inst.hypothesis_class();
  const auto& current = inst.domains.back().sample;
  for (const auto& d : inst.domains) {
    std::vector<double> point(inst.universe, 0.0);
    for (std::size_t x : d.sample) point[x] += 1.0;
    for (double& p : point) p /= static_cast<double>(d.sample.size());
    // mass[m] = mass[m without lowest bit] + point[lowest bit]
    std::vector<double> m(masks, 0.0);
    for (std::size_t k = 1; k < masks; ++k) {
      const int low = std::countr_zero(k);
      m[k] = m[k & (k - 1)] + point[static_cast<std::size_t>(low)];
    }
    mass_.push_back(std::move(m));
    div_.push_back(hdh_exact(H, d.sample, current));
  }
}

double InstanceEvaluator::mass(int i, std::uint64_t mask) const {
  return mass_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(mask)];
}

CheckReport check_intra_bound(const BoundInstance& inst) {
  const InstanceEvaluator ev(inst);
  CheckReport rep{"intra_domain"};
  for (std::uint64_t h : inst.hypotheses) {
    for (std::uint64_t ref : inst.hypotheses) {
      for (int i = 1; i < inst.t(); ++i) rep.record(ev.err(i, h), ev.err(i, h, ref) + ev.err(i, ref), kBoundTolerance);
    }
  }
  return rep;
}

CheckReport check_cross_bound(const BoundInstance& inst, const CheckOptions& opt) {
  const InstanceEvaluator ev(inst);
  const double sign = opt.flip_divergence_sign ? -1.0 : 1.0;
  const int t = inst.t();
  CheckReport rep{"cross_domain"};
  for (std::uint64_t h : inst.hypotheses) {
    for (std::uint64_t ref : inst.hypotheses) {
      for (int i = 1; i < t; ++i) {
        rep.record(ev.err(i, h), ev.err(t, h, ref) + sign * 0.5 * ev.divergence(i) + ev.err(i, ref), kBoundTolerance);
      }
    }
  }
  return rep;
}

namespace {

double unified_rhs(const InstanceEvaluator& ev, int t, std::uint64_t h, std::uint64_t ref,
                   const std::vector<CoeffTriple>& omega, double sign) {
  double rhs = ev.err(t, h);
  double beta_sum = 0.0;
  for (int i = 1; i < t; ++i) {
    const CoeffTriple& w = omega[static_cast<std::size_t>(i - 1)];
    beta_sum += w.beta;
    rhs += w.gamma * ev.err(i, h) + w.alpha * ev.err(i, h, ref) + sign * 0.5 * w.beta * ev.divergence(i) +
           (w.alpha + w.beta) * ev.err(i, ref);
  }
  return rhs + beta_sum * ev.err(t, h, ref);
}

}  // namespace

double unified_bound_value(const InstanceEvaluator& ev, const BoundInstance& inst,
                           const std::vector<CoeffTriple>& omega, double divergence_sign) {
  return unified_rhs(ev, inst.t(), inst.hypotheses[inst.h], inst.hypotheses[inst.h_prev], omega, divergence_sign);
}

CheckReport check_unified_bound(const BoundInstance& inst, const CheckOptions& opt) {
  const InstanceEvaluator ev(inst);
  const double sign = opt.flip_divergence_sign ? -1.0 : 1.0;
  const int t = inst.t();
  CheckReport rep{"unified"};
  for (std::uint64_t h : inst.hypotheses) {
    double lhs = 0.0;
    for (int i = 1; i <= t; ++i) lhs += ev.err(i, h);
    for (std::uint64_t ref : inst.hypotheses) {
      rep.record(lhs, unified_rhs(ev, t, h, ref, inst.omega, sign), kBoundTolerance);
    }
  }
  return rep;
}

CheckReport check_disagreement_gap(const BoundInstance& inst) {
  const InstanceEvaluator ev(inst);
  const int t = inst.t();
  CheckReport rep{"disagreement_gap"};
  for (std::uint64_t a : inst.hypotheses) {
    for (std::uint64_t b : inst.hypotheses) {
      for (int i = 1; i < t; ++i) {
        rep.record(std::abs(ev.err(i, a, b) - ev.err(t, a, b)), 0.5 * ev.divergence(i), kBoundTolerance);
      }
    }
  }
  return rep;
}

GridReport tightest_bound_grid(const BoundInstance& inst, const std::vector<Method>& presets, int resolution,
                               double tol) {
  if (resolution < 2) throw ContractError("tightest_bound_grid: resolution must be >= 2");
  const InstanceEvaluator ev(inst);
  const int t = inst.t();
  const std::uint64_t h = inst.hypotheses[inst.h];
  const std::uint64_t ref = inst.hypotheses[inst.h_prev];

  GridReport rep;
  rep.resolution = resolution;
  // The bound is linear in each triple: per-domain costs of alpha, beta, gamma.
  rep.argmin.resize(static_cast<std::size_t>(t - 1));
  for (int i = 1; i < t; ++i) {
    const double ca = ev.err(i, h, ref) + ev.err(i, ref);
    const double cb = ev.err(t, h, ref) + 0.5 * ev.divergence(i) + ev.err(i, ref);
    const double cg = ev.err(i, h);
    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= resolution; ++a) {
      for (int b = 0; a + b <= resolution; ++b) {
        const int g = resolution - a - b;
        const CoeffTriple w{static_cast<double>(a) / resolution, static_cast<double>(b) / resolution,
                            static_cast<double>(g) / resolution};
        const double v = w.alpha * ca + w.beta * cb + w.gamma * cg;
        if (v < best) {
          best = v;
          rep.argmin[static_cast<std::size_t>(i - 1)] = w;
        }
      }
    }
  }
  rep.grid_min = unified_bound_value(ev, inst, rep.argmin);

  for (Method m : presets) {
    PresetSpec spec;
    spec.method = m;
    CoeffTriple w;
    try {
      w = preset_triple(spec, t);
    } catch (const ConfigError&) {
      rep.skipped_presets.emplace_back(method_name(m));
      continue;
    }
    const double v = unified_bound_value(ev, inst, std::vector<CoeffTriple>(static_cast<std::size_t>(t - 1), w));
    rep.preset_values.emplace_back(std::string(method_name(m)), v);
    if (rep.grid_min > v + tol) ++rep.violations;
  }
  return rep;
}

double radical_argument(const std::vector<CoeffTriple>& omega, double n_current, const std::vector<double>& n_memory) {
  if (omega.size() != n_memory.size()) throw ContractError("radical_argument: omega and memory sizes differ");
  double beta_sum = 0.0;
  double mem = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    beta_sum += omega[i].beta;
    const double ga = omega[i].gamma + omega[i].alpha;
    mem += ga * ga / n_memory[i];
  }
  return (1.0 + beta_sum) * (1.0 + beta_sum) / n_current + mem;
}

ErmShapeReport check_erm_bound_shape(double n_current, const std::vector<double>& n_memory, double C) {
  const int t = static_cast<int>(n_memory.size()) + 1;
  ErmShapeReport rep;
  const std::vector<CoeffTriple> er(n_memory.size(), preset_triple(Method::kEr, std::max(t, 2)));
  const std::vector<CoeffTriple> lwf(n_memory.size(), preset_triple(Method::kLwf, std::max(t, 2)));
  rep.er_eq5 = radical_argument(er, n_current, n_memory);
  rep.er_eq3 = 1.0 / n_current;
  for (double n : n_memory) rep.er_eq3 += 1.0 / n;
  rep.lwf_eq5 = radical_argument(lwf, n_current, n_memory);
  rep.lwf_closed = static_cast<double>(t) * t / n_current;
  rep.max_abs_diff = std::max({std::abs(rep.er_eq5 - rep.er_eq3), std::abs(rep.lwf_eq5 - rep.lwf_closed),
                               std::abs(C * std::sqrt(rep.er_eq5) - C * std::sqrt(rep.er_eq3))});
  return rep;
}

BoundStats bound_stats(const BoundInstance& inst) {
  const InstanceEvaluator ev(inst);
  const int t = inst.t();
  const std::uint64_t h = inst.hypotheses[inst.h];
  const std::uint64_t ref = inst.hypotheses[inst.h_prev];
  BoundStats s;
  for (int i = 1; i < t; ++i) {
    s.err_h.push_back(ev.err(i, h));
    s.err_h_vs_ref.push_back(ev.err(i, h, ref));
    s.divergence.push_back(ev.divergence(i));
    s.err_ref.push_back(ev.err(i, ref));
    s.n_memory.push_back(static_cast<double>(inst.domains[static_cast<std::size_t>(i - 1)].sample.size()));
  }
  s.err_t_h_vs_ref = ev.err(t, h, ref);
  s.n_current = static_cast<double>(inst.domains.back().sample.size());
  return s;
}

namespace {

std::size_t uniform_index(std::size_t n, Rng& rng) { return static_cast<std::size_t>(rng() % n); }

double unit(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

BoundInstance random_instance(const RandomInstanceSpec& spec, Rng& rng) {
  if (spec.min_points < 1 || spec.max_points < spec.min_points || spec.max_points > 8 || spec.domains < 2 ||
      spec.max_hypotheses < 1 || spec.max_sample < 1) {
    throw ContractError("random_instance: invalid specification");
  }
  BoundInstance inst;
  inst.universe = spec.min_points + uniform_index(spec.max_points - spec.min_points + 1, rng);
  const std::size_t n = inst.universe;
  const std::uint64_t full = (std::uint64_t{1} << n) - 1;

  const std::uint64_t shared_labels = rng() & full;
  for (int i = 0; i < spec.domains; ++i) {
    FiniteDomain d;
    std::vector<std::size_t> support;
    const std::uint64_t sup_mask = (rng() & full) | (std::uint64_t{1} << uniform_index(n, rng));
    for (std::size_t x = 0; x < n; ++x) {
      if ((sup_mask >> x) & 1u) support.push_back(x);
    }
    const std::size_t m = 1 + uniform_index(spec.max_sample, rng);
    for (std::size_t k = 0; k < m; ++k) d.sample.push_back(support[uniform_index(support.size(), rng)]);
    d.labels = (rng() & 1u) ? shared_labels : (rng() & full);
    inst.domains.push_back(std::move(d));
  }

  const std::size_t all = std::size_t{1} << n;
  const std::size_t cap = std::min(spec.max_hypotheses, all);
  const std::size_t k = (rng() % 3 == 0) ? cap : 1 + uniform_index(cap, rng);
  for (std::size_t idx : sample_without_replacement(all, k, rng)) inst.hypotheses.push_back(idx);
  inst.h = uniform_index(inst.hypotheses.size(), rng);
  inst.h_prev = uniform_index(inst.hypotheses.size(), rng);

  for (int i = 1; i < spec.domains; ++i) {
    CoeffTriple w;
    if (rng() % 4 == 0) {
      const std::size_t v = uniform_index(3, rng);
      w = {v == 0 ? 1.0 : 0.0, v == 1 ? 1.0 : 0.0, v == 2 ? 1.0 : 0.0};
    } else {
      const double a = -std::log1p(-unit(rng));
      const double b = -std::log1p(-unit(rng));
      const double g = -std::log1p(-unit(rng));
      const double s = a + b + g;
      w = {a / s, b / s, g / s};
      w.gamma = 1.0 - w.alpha - w.beta;
    }
    inst.omega.push_back(w);
  }
  return inst;
}

std::size_t BoundSuiteReport::total_violations() const {
  std::size_t v = grid_violations;
  for (const auto& c : checks) v += c.violations;
  if (descent_instances > 0 && descent_worst_gap > descent_tolerance) ++v;
  return v;
}

BoundSuiteReport run_bound_suite(const BoundSuiteConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  BoundSuiteReport rep;
  rep.checks = {CheckReport{"intra_domain"}, CheckReport{"cross_domain"}, CheckReport{"unified"},
                CheckReport{"disagreement_gap"}};
  Rng rng = make_rng(cfg.seed, "bounds/instances");
  for (std::size_t k = 0; k < cfg.instances; ++k) {
    const BoundInstance inst = random_instance(cfg.instance, rng);
    rep.checks[0].merge(check_intra_bound(inst));
    rep.checks[1].merge(check_cross_bound(inst, cfg.options));
    rep.checks[2].merge(check_unified_bound(inst, cfg.options));
    rep.checks[3].merge(check_disagreement_gap(inst));
  }

  Rng grid_rng = make_rng(cfg.seed, "bounds/grid");
  for (std::size_t k = 0; k < cfg.grid_instances; ++k) {
    const BoundInstance inst = random_instance(cfg.instance, grid_rng);
    const GridReport g = tightest_bound_grid(inst, triple_presets(), cfg.grid_resolution);
    ++rep.grid_instances;
    rep.grid_violations += g.violations;
    if (rep.argmin_samples.size() < 5) rep.argmin_samples.push_back(g.argmin);
  }

  rep.erm_shape = check_erm_bound_shape(100.0, {10.0, 10.0}, cfg.C);
  if (rep.erm_shape.max_abs_diff > 1e-12) rep.checks.push_back(CheckReport{"erm_shape", 1, 1, rep.erm_shape.max_abs_diff});

  Rng descent_rng = make_rng(cfg.seed, "bounds/descent");
  for (std::size_t k = 0; k < cfg.descent_instances; ++k) {
    const BoundInstance inst = random_instance(cfg.instance, descent_rng);
    const BoundStats stats = bound_stats(inst);
    const CoeffGapReport gap = coefficient_descent_gap(stats, inst.t(), cfg.C, cfg.descent_steps, cfg.descent_lr);
    ++rep.descent_instances;
    rep.descent_worst_gap = std::max(rep.descent_worst_gap, gap.gap);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace udil
