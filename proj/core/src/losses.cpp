#include "udil/losses.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <string>

#include "udil/errors.hpp"

namespace udil {

void HyperParams::validate() const {
  if (!(lambda_d >= 0.0)) throw ConfigError("lambda_d must be >= 0");
  if (!(C >= 0.0)) throw ConfigError("C must be >= 0");
  if (!(lambda_p >= 0.0)) throw ConfigError("lambda_p must be >= 0");
  if (!(lambda_s >= 0.0)) throw ConfigError("lambda_s must be >= 0");
}

Var classification_loss(const Var& log_probs, std::span<const int> labels) {
  if (log_probs.rows() == 0) throw ContractError("classification_loss: empty batch");
  return nll_mean(log_probs, labels);
}

Var classification_loss(Classifier& h, const LabeledSet& batch) {
  if (batch.empty()) throw ContractError("classification_loss: empty batch");
  return classification_loss(h.log_probs(Var::constant(batch.inputs)), batch.labels);
}

Var distillation_loss(const Var& log_probs, const Matrix& teacher_probs) {
  if (teacher_probs.cols() != log_probs.cols()) {
    throw ContractError("distillation_loss: student has " + std::to_string(log_probs.cols()) +
                        " outputs, teacher has " + std::to_string(teacher_probs.cols()));
  }
  if (log_probs.rows() == 0) throw ContractError("distillation_loss: empty batch");
  return soft_nll_mean(log_probs, teacher_probs);
}

Var distillation_loss(Classifier& h, const Classifier& teacher, const Matrix& inputs) {
  return distillation_loss(h.log_probs(Var::constant(inputs)), teacher.predict(inputs));
}

double erm01(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() == 0) throw ContractError("erm01: empty set");
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) throw DimensionError("erm01: label count mismatch");
  const auto pred = argmax_rows(probs);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != labels[i] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

double erm01(const Classifier& h, const LabeledSet& set) {
  if (set.empty()) throw ContractError("erm01: empty set");
  return erm01(h.predict(set.inputs), set.labels);
}

double erm01_agreement(const Matrix& probs_h, const Matrix& probs_ref) {
  if (probs_h.rows() == 0) throw ContractError("erm01_agreement: empty set");
  if (probs_h.rows() != probs_ref.rows()) throw DimensionError("erm01_agreement: row count mismatch");
  return erm01(probs_h, argmax_rows(probs_ref));
}

double erm01_agreement(const Classifier& h, const Classifier& ref, const Matrix& inputs) {
  return erm01_agreement(h.predict(inputs), ref.predict(inputs));
}

// ---------------------------------------------------------------- v_l

Var v_l(const Matrix& omega, const ReplayBatch& current, std::span<const ReplayBatch> past) {
  if (static_cast<std::size_t>(omega.rows()) != past.size()) {
    throw ContractError("v_l: omega has " + std::to_string(omega.rows()) + " rows for " +
                        std::to_string(past.size()) + " past domains");
  }
  Var total = classification_loss(current.log_probs, current.labels);
  double beta_sum = 0.0;
  for (std::size_t i = 0; i < past.size(); ++i) {
    const auto r = static_cast<Index>(i);
    const double alpha = omega(r, 0);
    const double gamma = omega(r, 2);
    beta_sum += omega(r, 1);
    if (gamma != 0.0) total = total + classification_loss(past[i].log_probs, past[i].labels) * gamma;
    if (alpha != 0.0) total = total + distillation_loss(past[i].log_probs, past[i].teacher_probs) * alpha;
  }
  if (beta_sum != 0.0) total = total + distillation_loss(current.log_probs, current.teacher_probs) * beta_sum;
  return total;
}

Var v_l(Classifier& h, const Classifier* history, const Matrix& omega, const LabeledSet& current,
        std::span<const LabeledSet> past) {
  if (!past.empty() && history == nullptr) throw ContractError("v_l: past domains require a history model");
  auto make = [&](const LabeledSet& s) {
    ReplayBatch b;
    b.log_probs = h.log_probs(Var::constant(s.inputs));
    b.labels = s.labels;
    if (history) b.teacher_probs = history->predict(s.inputs);
    return b;
  };
  const ReplayBatch cur = make(current);
  std::vector<ReplayBatch> prev;
  prev.reserve(past.size());
  for (const auto& s : past) prev.push_back(make(s));
  return v_l(omega, cur, prev);
}

// ---------------------------------------------------------------- v_01

void BoundStats::validate() const {
  const std::size_t k = err_h.size();
  if (err_h_vs_ref.size() != k || divergence.size() != k || err_ref.size() != k || n_memory.size() != k) {
    throw ContractError("BoundStats: per-domain vectors differ in length");
  }
  if (!(n_current > 0.0)) throw ContractError("BoundStats: N_t must be positive");
  for (double n : n_memory) {
    if (!(n > 0.0)) throw ContractError("BoundStats: every memory size N~_i must be positive");
  }
}

namespace {

Matrix as_column(const std::vector<double>& v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Index>(i), 0) = v[i];
  return m;
}

}  // namespace

Var v_01(const Var& omega, const BoundStats& stats, double C) {
  stats.validate();
  if (static_cast<std::size_t>(omega.rows()) != stats.past_domains() || omega.cols() != 3) {
    throw ContractError("v_01: omega shape does not match statistics");
  }
  const Var alpha = column(omega, 0);
  const Var beta = column(omega, 1);
  const Var gamma = column(omega, 2);
  const Var beta_sum = sum(beta);

  Matrix inv_mem(static_cast<Index>(stats.n_memory.size()), 1);
  for (std::size_t i = 0; i < stats.n_memory.size(); ++i) inv_mem(static_cast<Index>(i), 0) = 1.0 / stats.n_memory[i];

  Var linear = dot_const(gamma, as_column(stats.err_h)) + dot_const(alpha, as_column(stats.err_h_vs_ref)) +
               beta_sum * stats.err_t_h_vs_ref + dot_const(beta, as_column(stats.divergence)) * 0.5 +
               dot_const(alpha + beta, as_column(stats.err_ref));
  Var radicand = square(beta_sum + 1.0) * (1.0 / stats.n_current) + dot_const(square(gamma + alpha), inv_mem);
  return linear + sqrt(radicand) * C;
}

double v_01_value(const Matrix& omega, const BoundStats& stats, double C) {
  return v_01(Var::constant(omega), stats, C).item();
}

// ---------------------------------------------------------------- v_d

Var v_d(Mlp& discriminator, ParamMode d_mode, const Var& current_embed, std::span<const Var> past_embeds,
        const Matrix& omega, int t) {
  if (static_cast<int>(discriminator.out_dim()) != t) {
    throw ContractError("v_d: discriminator has " + std::to_string(discriminator.out_dim()) + " outputs, need t = " +
                        std::to_string(t));
  }
  if (static_cast<std::size_t>(omega.rows()) != past_embeds.size() || static_cast<int>(past_embeds.size()) != t - 1) {
    throw ContractError("v_d: need t-1 past batches and omega rows");
  }
  const double beta_sum = omega.rows() > 0 ? omega.col(1).sum() : 0.0;
  const std::vector<int> current_ids(static_cast<std::size_t>(current_embed.rows()), t - 1);
  Var total = nll_mean(discriminator.forward_log_probs(current_embed, d_mode), current_ids) * beta_sum;
  for (std::size_t i = 0; i < past_embeds.size(); ++i) {
    const double beta = omega(static_cast<Index>(i), 1);
    const std::vector<int> ids(static_cast<std::size_t>(past_embeds[i].rows()), static_cast<int>(i));
    total = total + nll_mean(discriminator.forward_log_probs(past_embeds[i], d_mode), ids) * beta;
  }
  return total;
}

// ---------------------------------------------------------------- auxiliary

Var v_p(std::span<const Var> embeds, std::span<const Matrix> previous_embeds) {
  if (embeds.size() != previous_embeds.size()) throw ContractError("v_p: batch count mismatch");
  if (embeds.empty()) return Var::scalar(0.0);
  Var total = mean(row_sqdist_const(embeds[0], previous_embeds[0]));
  for (std::size_t i = 1; i < embeds.size(); ++i) total = total + mean(row_sqdist_const(embeds[i], previous_embeds[i]));
  return total;
}

Var v_p(Mlp& encoder, const Mlp& previous_encoder, std::span<const Matrix> memory_inputs) {
  std::vector<Var> cur;
  std::vector<Matrix> prev;
  for (const Matrix& x : memory_inputs) {
    cur.push_back(encoder.forward(Var::constant(x)));
    prev.push_back(previous_encoder.predict(x));
  }
  return v_p(cur, prev);
}

std::vector<ContrastiveTuple> make_contrastive_tuples(std::span<const int> labels, std::size_t negatives,
                                                      Rng& rng) {
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<Index>(i));
  std::vector<ContrastiveTuple> tuples;
  const auto n = static_cast<Index>(labels.size());
  for (Index a = 0; a < n; ++a) {
    const auto& same = by_class[labels[static_cast<std::size_t>(a)]];
    if (same.size() < 2) continue;
    ContrastiveTuple tup;
    tup.anchor = a;
    do {
      tup.positive = same[static_cast<std::size_t>(rng() % same.size())];
    } while (tup.positive == a);
    for (std::size_t k = 0; k < negatives; ++k) {
      Index u = 0;
      do {
        u = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
      } while (u == a);
      tup.negatives.push_back(u);
    }
    tuples.push_back(std::move(tup));
  }
  return tuples;
}

Var v_s(const Var& embeds, std::span<const ContrastiveTuple> tuples) {
  if (tuples.empty()) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: v_s: batch has no same-class pair; contrastive term skipped\n";
    }
    return Var::scalar(0.0);
  }
  const std::size_t width = 1 + tuples.front().negatives.size();
  std::vector<std::pair<Index, Index>> coords;
  coords.reserve(tuples.size() * width);
  for (const auto& tup : tuples) {
    if (tup.negatives.size() + 1 != width) throw ContractError("v_s: tuples must share the negative count");
    coords.emplace_back(tup.anchor, tup.positive);
    for (Index u : tup.negatives) coords.emplace_back(tup.anchor, u);
  }
  const Var dist = pairwise_sqdist(embeds);
  const Var table = reshape(gather(dist, std::move(coords)), static_cast<Index>(tuples.size()), static_cast<Index>(width));
  // -log softmax at column 0 of -s: s_pos + logsumexp(-s_row)
  const Var per_tuple = column(table, 0) + logsumexp_rows(-table);
  return mean(per_tuple);
}

Var encoder_aux_loss(const Var& vd, const Var& vp, const Var& vs, const HyperParams& hp) {
  return vd * -hp.lambda_d + vp * hp.lambda_p + vs * hp.lambda_s;
}

}  // namespace udil
