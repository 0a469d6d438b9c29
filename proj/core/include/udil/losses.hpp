#pragma once

// Training losses of the replay objective.
//
// Naming follows the value functions of the objective:
//   v_l   model loss: replay cross-entropy + distillation, weighted by a
//         stopped Omega
//   v_01  coefficient loss: the 0-1 bound as a function of Omega only
//   v_d   domain-discriminator value function
//   v_p   past-embedding distillation (encoder stability)
//   v_s   supervised contrastive loss (label-aware alignment)
//
// Most functions come in two flavours: a low-level one that takes network
// outputs as Vars (what the trainer uses, so each batch is encoded once) and
// a convenience overload that runs the networks itself.

#include <map>
#include <span>
#include <vector>

#include "udil/data.hpp"
#include "udil/diff.hpp"
#include "udil/mlp.hpp"
#include "udil/rng.hpp"

namespace udil {

struct HyperParams {
  double lambda_d = 1.0;  // domain-alignment strength
  double C = 1.0;         // generalization-effect scalar (absorbs VC dim and confidence)
  double lambda_p = 0.0;  // past-embedding distillation weight
  double lambda_s = 0.0;  // supervised contrastive weight

  void validate() const;  // all nonnegative, else ConfigError
};

// Frozen H_{t-1} plus its cached 0-1 risk on every memory bucket.
struct HistorySnapshot {
  Classifier model;
  std::map<int, double> memory_risk;  // domain id -> err_i(H_{t-1}) on M_i
};

// ---- cross-entropy family ----

// Mean of -log p(y) over the batch.
Var classification_loss(const Var& log_probs, std::span<const int> labels);
Var classification_loss(Classifier& h, const LabeledSet& batch);

// Mean of -sum_j H(x)_j log h(x)_j; `teacher_probs` is a constant.
Var distillation_loss(const Var& log_probs, const Matrix& teacher_probs);
Var distillation_loss(Classifier& h, const Classifier& teacher, const Matrix& inputs);

// ---- 0-1 risks ----

// Fraction of rows whose argmax differs from the label.
double erm01(const Matrix& probs, std::span<const int> labels);
double erm01(const Classifier& h, const LabeledSet& set);
// Fraction of rows where argmax(h) != argmax(H).
double erm01_agreement(const Matrix& probs_h, const Matrix& probs_ref);
double erm01_agreement(const Classifier& h, const Classifier& ref, const Matrix& inputs);

// ---- v_l ----

// One batch seen by the current model h.
struct ReplayBatch {
  Var log_probs;                 // h's log-probabilities
  std::span<const int> labels;   // ground truth
  Matrix teacher_probs;          // H_{t-1}'s probabilities; may be empty when unused
};

// sum_i [gamma_i CE(X_i) + alpha_i KD(X_i)] + CE(S_t) + (sum_i beta_i) KD(S_t).
// `omega` is (t-1) x 3 (alpha, beta, gamma) and is treated as a constant.
// Throws ContractError if omega.rows() != past.size().
Var v_l(const Matrix& omega, const ReplayBatch& current, std::span<const ReplayBatch> past);
Var v_l(Classifier& h, const Classifier* history, const Matrix& omega, const LabeledSet& current,
        std::span<const LabeledSet> past);

// ---- v_01 ----

// 0-1 statistics consumed by v_01; all constants.
struct BoundStats {
  std::vector<double> err_h;         // err_i(h) on memory of domain i
  std::vector<double> err_h_vs_ref;  // err_i(h, H_{t-1}) on memory of domain i
  std::vector<double> divergence;    // d_i estimate in [0, 2]
  std::vector<double> err_ref;       // err_i(H_{t-1}) on memory of domain i
  double err_t_h_vs_ref = 0.0;       // err_t(h, H_{t-1}) on current data
  double n_current = 1.0;            // N_t
  std::vector<double> n_memory;      // N~_i

  std::size_t past_domains() const { return err_h.size(); }
  void validate() const;  // consistent lengths, positive sizes (ContractError)
};

// sum_i [gamma_i e_i(h) + alpha_i e_i(h,H)] + (sum beta) e_t(h,H) + 1/2 sum beta_i d_i
//   + sum (alpha_i + beta_i) e_i(H) + C sqrt((1 + sum beta)^2 / N_t + sum (gamma_i + alpha_i)^2 / N~_i)
// Differentiable in the materialized (t-1) x 3 `omega` only.
Var v_01(const Var& omega, const BoundStats& stats, double C);
double v_01_value(const Matrix& omega, const BoundStats& stats, double C);

// ---- v_d ----

// (sum beta_i) CE_d(current -> t) + sum_i beta_i CE_d(past_i -> i).
// `discriminator` must have a t-way softmax head (ContractError otherwise);
// `d_mode` selects whether its parameters receive gradient.
Var v_d(Mlp& discriminator, ParamMode d_mode, const Var& current_embed, std::span<const Var> past_embeds,
        const Matrix& omega, int t);

// ---- auxiliary encoder losses ----

// sum_i mean ||e(x) - E_{t-1}(x)||^2 over the memory exemplars of each domain.
// Empty input (t = 1) gives 0.
Var v_p(std::span<const Var> embeds, std::span<const Matrix> previous_embeds);
Var v_p(Mlp& encoder, const Mlp& previous_encoder, std::span<const Matrix> memory_inputs);

struct ContrastiveTuple {
  Index anchor = 0;
  Index positive = 0;
  std::vector<Index> negatives;
};

// For every row with at least one same-class partner: one random positive and
// `negatives` indices drawn uniformly (with replacement) from the other rows,
// irrespective of class or domain.
std::vector<ContrastiveTuple> make_contrastive_tuples(std::span<const int> labels, std::size_t negatives, Rng& rng);

// Mean over tuples of -log( e^{-s(a,p)} / (e^{-s(a,p)} + sum_u e^{-s(a,u)}) ),
// s = squared Euclidean distance between embeddings. No tuples: warns once
// and returns 0.
Var v_s(const Var& embeds, std::span<const ContrastiveTuple> tuples);

// -lambda_d v_d + lambda_p v_p + lambda_s v_s.
Var encoder_aux_loss(const Var& vd, const Var& vp, const Var& vs, const HyperParams& hp);

}  // namespace udil
