#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "udil/coeffs.hpp"
#include "udil/data.hpp"
#include "udil/losses.hpp"
#include "udil/memory_bank.hpp"
#include "udil/metrics.hpp"
#include "udil/mlp.hpp"
#include "udil/rng.hpp"

namespace udil {

struct Architecture {
  std::vector<std::size_t> encoder_hidden{64};        // ReLU layers before the embedding
  std::size_t embed_dim = 32;
  std::vector<std::size_t> predictor_hidden{};        // empty = linear softmax predictor
  std::vector<std::size_t> discriminator_hidden{32};

  void validate() const;  // ConfigError on zero widths
};

struct TrainConfig {
  PresetSpec method;                    // method.method selects the run mode
  SgdConfig sgd{0.05, 200, 32};         // eta, steps per domain S, batch size B
  std::optional<double> lr_discriminator;  // defaults to sgd.learning_rate
  std::optional<double> lr_coefficients;   // defaults to sgd.learning_rate
  HyperParams hp;
  Architecture arch;
  std::size_t buffer_capacity = 100;
  bool split_memory_batch = false;      // B split across past domains instead of B each
  bool full_statistics = false;         // coefficient statistics on all of S_t and M_i, not the minibatch
  std::size_t contrastive_negatives = 8;
  int baseline_models = 5;
  bool check_isolation = false;         // assert per-line parameter isolation via checksums

  double lr_d() const { return lr_discriminator.value_or(sgd.learning_rate); }
  double lr_omega() const { return lr_coefficients.value_or(sgd.learning_rate); }
  void validate() const;
};

struct TrainState {
  Classifier model;
  Mlp discriminator;
  std::optional<HistorySnapshot> history;
  CoeffSimplex omega;
  MemoryBank bank;
  LabeledSet joint_pool;  // Joint mode: union of the training sets seen so far
  int t = 0;
  Rng init_rng;
  Rng sampling_rng;
};

// Fresh state for domain 1: randomly initialized h, no history, empty bank.
TrainState make_state(const TrainConfig& cfg, Index input_dim, int num_classes, std::uint64_t seed);

// Fresh discriminator with a t-way softmax head (t >= 2).
Mlp grow_discriminator(const Architecture& arch, int t, Rng& rng);

// Moves the state to domain t: new discriminator and Omega. t must be
// state.t + 1.
void begin_domain(TrainState& state, const TrainConfig& cfg, int t);

struct DomainLog {
  int t = 0;
  double final_model_loss = 0.0;
  double final_v01 = 0.0;               // adaptive mode only
  std::vector<double> divergence;       // last step's d_i estimates
  std::size_t memory_shortfall = 0;
};

// Runs the S steps of one domain. Requires domain_data.domain_id == state.t.
DomainLog train_domain(TrainState& state, const TrainConfig& cfg, const LabeledSet& domain_data);

// Deep copy of h with its 0-1 risk on every memory bucket.
HistorySnapshot snapshot_history(const TrainState& state);

// Lines 9-10: H_t <- h, rebalance memory, refresh the cached memory risks.
void end_domain(TrainState& state, const TrainConfig& cfg, const LabeledSet& domain_data, DomainLog& log);

// The coefficient step on its own: one gradient step of v_01 on the Omega logits.
// Returns v_01 before the step.
double coefficient_step(CoeffSimplex& omega, const BoundStats& stats, double C, double lr);

struct CoeffGapReport {
  double descent_value = 0.0;
  double best_preset_value = 0.0;
  std::string best_preset;
  double gap = 0.0;  // descent_value - best_preset_value
  Matrix omega;
};

// Runs `steps` coefficient steps from the uniform init on frozen statistics
// and compares v_01 against every preset applicable at t.
CoeffGapReport coefficient_descent_gap(const BoundStats& stats, int t, double C, int steps, double lr);

struct RunResult {
  AccuracyMatrix R;
  std::vector<double> baseline;            // r_i per domain (index i-1)
  std::vector<Matrix> omega_trajectory;    // Omega at the end of domains 2..T
  std::vector<DomainLog> logs;
  Classifier final_model;
  MemoryBank bank;
};

// Trains over the domains in order, filling R (including the superdiagonal).
RunResult run_sequence(const DomainStream& stream, const TrainConfig& cfg, std::uint64_t seed);

// Accuracy of h on a labeled set.
double accuracy(const Classifier& h, const LabeledSet& set);

}  // namespace udil
