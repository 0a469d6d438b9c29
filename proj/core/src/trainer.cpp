#include "udil/trainer.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "udil/divergence.hpp"
#include "udil/errors.hpp"

namespace udil {

void Architecture::validate() const {
  auto positive = [](const std::vector<std::size_t>& v, const char* name) {
    for (std::size_t w : v) {
      if (w == 0) throw ConfigError(std::string(name) + ": widths must be positive");
    }
  };
  positive(encoder_hidden, "arch.encoder_hidden");
  positive(predictor_hidden, "arch.predictor_hidden");
  positive(discriminator_hidden, "arch.discriminator_hidden");
  if (embed_dim == 0) throw ConfigError("arch.embed_dim must be positive");
}

void TrainConfig::validate() const {
  sgd.validate();
  hp.validate();
  arch.validate();
  if (lr_discriminator && !(*lr_discriminator > 0.0)) throw ConfigError("lr_discriminator must be > 0");
  if (lr_coefficients && !(*lr_coefficients > 0.0)) throw ConfigError("lr_coefficients must be > 0");
  if (buffer_capacity == 0) throw ConfigError("buffer must be >= 1");
  if (baseline_models < 1) throw ConfigError("baseline_models must be >= 1");
}

namespace {

Classifier make_classifier(const Architecture& arch, Index input_dim, int num_classes, Rng& rng) {
  std::vector<std::size_t> enc{static_cast<std::size_t>(input_dim)};
  enc.insert(enc.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
  enc.push_back(arch.embed_dim);
  std::vector<std::size_t> pred{arch.embed_dim};
  pred.insert(pred.end(), arch.predictor_hidden.begin(), arch.predictor_hidden.end());
  pred.push_back(static_cast<std::size_t>(num_classes));
  Classifier h;
  h.encoder = Mlp(enc, OutputHead::kHidden, rng);
  h.predictor = Mlp(pred, OutputHead::kSoftmax, rng);
  return h;
}

LabeledSet sample_batch(const LabeledSet& set, std::size_t b, Rng& rng) {
  return set.subset(sample_without_replacement(set.size(), std::min(b, set.size()), rng));
}

void append(LabeledSet& pool, const LabeledSet& more) {
  if (pool.empty()) {
    pool = more;
    return;
  }
  Matrix joined(pool.inputs.rows() + more.inputs.rows(), pool.inputs.cols());
  joined << pool.inputs, more.inputs;
  pool.inputs = std::move(joined);
  pool.labels.insert(pool.labels.end(), more.labels.begin(), more.labels.end());
}

std::uint64_t omega_checksum(const CoeffSimplex& omega) {
  const Matrix& m = omega.logits().data();
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
  for (std::size_t k = 0; k < static_cast<std::size_t>(m.size()) * sizeof(double); ++k) {
    h = (h ^ bytes[k]) * 1099511628211ULL;
  }
  return h;
}

struct Checksums {
  std::uint64_t theta, phi, omega;
};

Checksums checksums(const TrainState& s) {
  return {s.model.checksum(), s.discriminator.checksum(), omega_checksum(s.omega)};
}

void expect_only(const Checksums& before, const Checksums& after, char changed, const char* line) {
  const bool ok = (changed == 't' || before.theta == after.theta) && (changed == 'p' || before.phi == after.phi) &&
                  (changed == 'o' || before.omega == after.omega);
  if (!ok) throw ContractError(std::string("update isolation violated at ") + line);
}

double erm_step(TrainState& state, const TrainConfig& cfg, const LabeledSet& source) {
  const LabeledSet batch = sample_batch(source, static_cast<std::size_t>(cfg.sgd.batch_size), state.sampling_rng);
  Var loss = classification_loss(state.model, batch);
  backward(loss);
  sgd_step(state.model.parameters(), cfg.sgd.learning_rate);
  return loss.item();
}

struct StepOutcome {
  double model_loss = 0.0;
  double v01 = 0.0;
  std::vector<double> divergence;
};

StepOutcome replay_step(TrainState& state, const TrainConfig& cfg, const LabeledSet& current_set) {
  const int t = state.t;
  const auto& hist = *state.history;
  const std::size_t B = static_cast<std::size_t>(cfg.sgd.batch_size);
  const std::size_t per_domain = cfg.split_memory_batch ? std::max<std::size_t>(1, B / static_cast<std::size_t>(t - 1)) : B;

  // Minibatches: B_t ~ S_t, B_i ~ M_i.
  const LabeledSet cur = sample_batch(current_set, B, state.sampling_rng);
  const auto past_map = state.bank.sample_past(per_domain, state.sampling_rng);
  std::vector<LabeledSet> past;
  for (int i = 1; i < t; ++i) {
    auto it = past_map.find(i);
    if (it == past_map.end()) throw ContractError("train_domain: memory bucket " + std::to_string(i) + " is empty");
    past.push_back(it->second);
  }

  const HyperParams& hp = cfg.hp;
  StepOutcome out;
  Checksums before{};
  if (cfg.check_isolation) before = checksums(state);

  // Discriminator step on stopped embeddings and Omega.
  Matrix emb_cur = state.model.embed(cur.inputs);
  std::vector<Matrix> emb_past;
  for (const auto& p : past) emb_past.push_back(state.model.embed(p.inputs));
  if (hp.lambda_d > 0.0) {
    std::vector<Var> consts;
    for (const auto& e : emb_past) consts.push_back(Var::constant(e));
    Var vd = v_d(state.discriminator, ParamMode::kTrack, Var::constant(emb_cur), consts,
                 state.omega.materialize_matrix(), t) * hp.lambda_d;
    backward(vd);
    sgd_step(state.discriminator.parameters(), cfg.lr_d());
    if (cfg.check_isolation) {
      const Checksums after = checksums(state);
      expect_only(before, after, 'p', "discriminator step");
      before = after;
    }
  }

  // Coefficient step on 0-1 statistics of the stopped model.
  const Matrix teach_cur = hist.model.predict(cur.inputs);
  std::vector<Matrix> teach_past;
  for (const auto& p : past) teach_past.push_back(hist.model.predict(p.inputs));
  {
    const LabeledSet& stat_cur = cfg.full_statistics ? current_set : cur;
    const Matrix stat_emb_cur = cfg.full_statistics ? state.model.embed(current_set.inputs) : emb_cur;
    BoundStats stats;
    for (int i = 1; i < t; ++i) {
      const auto k = static_cast<std::size_t>(i - 1);
      const LabeledSet& set = cfg.full_statistics ? state.bank.bucket(i) : past[k];
      const Matrix emb = cfg.full_statistics ? state.model.embed(set.inputs) : emb_past[k];
      const Matrix probs = state.model.predictor.predict(emb);
      stats.err_h.push_back(erm01(probs, set.labels));
      stats.err_h_vs_ref.push_back(
          erm01_agreement(probs, cfg.full_statistics ? hist.model.predict(set.inputs) : teach_past[k]));
      stats.divergence.push_back(hdh_discriminator_estimate(state.discriminator, stat_emb_cur, emb, i, t));
      stats.err_ref.push_back(hist.memory_risk.at(i));
      stats.n_memory.push_back(static_cast<double>(state.bank.bucket(i).size()));
    }
    stats.err_t_h_vs_ref =
        erm01_agreement(state.model.predictor.predict(stat_emb_cur),
                        cfg.full_statistics ? hist.model.predict(stat_cur.inputs) : teach_cur);
    stats.n_current = static_cast<double>(current_set.size());
    out.divergence = stats.divergence;
    if (state.omega.mode() == CoeffMode::kAdaptive) {
      out.v01 = coefficient_step(state.omega, stats, hp.C, cfg.lr_omega());
      if (cfg.check_isolation) {
        const Checksums after = checksums(state);
        expect_only(before, after, 'o', "coefficient step");
        before = after;
      }
    }
  }

  // Model step with stopped Omega and discriminator.
  const Matrix omega = state.omega.materialize_matrix();
  const Var e_cur = state.model.encoder.forward(Var::constant(cur.inputs));
  ReplayBatch rb_cur{state.model.predictor.forward_log_probs(e_cur), cur.labels, teach_cur};
  std::vector<Var> e_past;
  std::vector<ReplayBatch> rb_past;
  for (std::size_t k = 0; k < past.size(); ++k) {
    e_past.push_back(state.model.encoder.forward(Var::constant(past[k].inputs)));
    rb_past.push_back({state.model.predictor.forward_log_probs(e_past.back()), past[k].labels, teach_past[k]});
  }
  Var loss = v_l(omega, rb_cur, rb_past);
  out.model_loss = loss.item();
  if (hp.lambda_d > 0.0) {
    loss = loss - v_d(state.discriminator, ParamMode::kFrozen, e_cur, e_past, omega, t) * hp.lambda_d;
  }
  if (hp.lambda_p > 0.0) {
    std::vector<Matrix> prev;
    for (const auto& p : past) prev.push_back(hist.model.embed(p.inputs));
    loss = loss + v_p(e_past, prev) * hp.lambda_p;
  }
  if (hp.lambda_s > 0.0) {
    std::vector<Var> all{e_cur};
    std::vector<int> labels = cur.labels;
    for (std::size_t k = 0; k < past.size(); ++k) {
      all.push_back(e_past[k]);
      labels.insert(labels.end(), past[k].labels.begin(), past[k].labels.end());
    }
    const auto tuples = make_contrastive_tuples(labels, cfg.contrastive_negatives, state.sampling_rng);
    loss = loss + v_s(concat_rows(all), tuples) * hp.lambda_s;
  }
  backward(loss);
  sgd_step(state.model.parameters(), cfg.sgd.learning_rate);
  if (cfg.check_isolation) expect_only(before, checksums(state), 't', "model step");
  return out;
}

}  // namespace

TrainState make_state(const TrainConfig& cfg, Index input_dim, int num_classes, std::uint64_t seed) {
  cfg.validate();
  TrainState s;
  s.init_rng = make_rng(seed, "init");
  s.sampling_rng = make_rng(seed, "sampling");
  s.model = make_classifier(cfg.arch, input_dim, num_classes, s.init_rng);
  s.bank = MemoryBank(cfg.buffer_capacity);
  return s;
}

Mlp grow_discriminator(const Architecture& arch, int t, Rng& rng) {
  if (t < 2) throw ContractError("grow_discriminator: need t >= 2");
  std::vector<std::size_t> dims{arch.embed_dim};
  dims.insert(dims.end(), arch.discriminator_hidden.begin(), arch.discriminator_hidden.end());
  dims.push_back(static_cast<std::size_t>(t));
  return Mlp(dims, OutputHead::kSoftmax, rng);
}

void begin_domain(TrainState& state, const TrainConfig& cfg, int t) {
  if (t != state.t + 1) throw ContractError("begin_domain: domains must arrive in order");
  state.t = t;
  if (t >= 2) {
    state.discriminator = grow_discriminator(cfg.arch, t, state.init_rng);
    state.omega = from_preset(cfg.method, t);
  }
}

DomainLog train_domain(TrainState& state, const TrainConfig& cfg, const LabeledSet& domain_data) {
  if (domain_data.domain_id != state.t) {
    throw ContractError("train_domain: data of domain " + std::to_string(domain_data.domain_id) +
                        " given while at domain " + std::to_string(state.t));
  }
  if (domain_data.empty()) throw ContractError("train_domain: S_t is empty");
  const Method m = cfg.method.method;
  if (state.t >= 2) {
    const bool adaptive = state.omega.mode() == CoeffMode::kAdaptive;
    if (adaptive != (m == Method::kUdil)) {
      throw ConfigError("train_domain: method " + std::string(method_name(m)) + " does not match the coefficient mode");
    }
    if (!state.history) throw ContractError("train_domain: history model missing at t >= 2");
  }

  DomainLog log;
  log.t = state.t;
  if (m == Method::kJoint) append(state.joint_pool, domain_data);
  const bool plain = state.t == 1 || m == Method::kFineTune || m == Method::kJoint;
  const LabeledSet& source = m == Method::kJoint ? state.joint_pool : domain_data;
  for (int s = 0; s < cfg.sgd.step_count; ++s) {
    if (plain) {
      log.final_model_loss = erm_step(state, cfg, source);
    } else {
      const StepOutcome o = replay_step(state, cfg, domain_data);
      log.final_model_loss = o.model_loss;
      log.final_v01 = o.v01;
      log.divergence = o.divergence;
    }
  }
  return log;
}

HistorySnapshot snapshot_history(const TrainState& state) {
  HistorySnapshot snap{state.model, {}};
  for (const auto& [id, bucket] : state.bank.buckets()) {
    if (!bucket.empty()) snap.memory_risk[id] = erm01(snap.model, bucket);
  }
  return snap;
}

void end_domain(TrainState& state, const TrainConfig& cfg, const LabeledSet& domain_data, DomainLog& log) {
  (void)cfg;
  state.bank.update_after_domain(domain_data, state.t, state.sampling_rng);
  log.memory_shortfall = state.bank.last_shortfall();
  state.history = snapshot_history(state);
}

double coefficient_step(CoeffSimplex& omega, const BoundStats& stats, double C, double lr) {
  Var loss = v_01(omega.materialize_var(), stats, C);
  const double value = loss.item();
  backward(loss);
  Tensor* p = &omega.logits();
  sgd_step(std::span<Tensor* const>(&p, 1), lr);
  return value;
}

CoeffGapReport coefficient_descent_gap(const BoundStats& stats, int t, double C, int steps, double lr) {
  CoeffSimplex omega = init_uniform(t);
  for (int s = 0; s < steps; ++s) coefficient_step(omega, stats, C, lr);
  CoeffGapReport rep;
  rep.omega = omega.materialize_matrix();
  rep.descent_value = v_01_value(rep.omega, stats, C);
  rep.best_preset_value = std::numeric_limits<double>::infinity();
  for (Method m : triple_presets()) {
    CoeffTriple w;
    try {
      w = preset_triple(m, t);
    } catch (const ConfigError&) {
      continue;
    }
    Matrix pm(t - 1, 3);
    pm.rowwise() = RowVector{{w.alpha, w.beta, w.gamma}};
    const double v = v_01_value(pm, stats, C);
    if (v < rep.best_preset_value) {
      rep.best_preset_value = v;
      rep.best_preset = std::string(method_name(m));
    }
  }
  rep.gap = rep.descent_value - rep.best_preset_value;
  return rep;
}

double accuracy(const Classifier& h, const LabeledSet& set) { return 1.0 - erm01(h, set); }

RunResult run_sequence(const DomainStream& stream, const TrainConfig& cfg, std::uint64_t seed) {
  if (stream.size() == 0) throw ContractError("run_sequence: empty stream");
  stream.validate();
  const int T = static_cast<int>(stream.size());
  TrainState state = make_state(cfg, stream.input_dim, stream.num_classes, seed);

  RunResult res;
  res.R = AccuracyMatrix(T);
  res.baseline.assign(static_cast<std::size_t>(T), 0.0);
  Rng brng = make_rng(seed, "baseline");
  for (int k = 0; k < cfg.baseline_models; ++k) {
    const Classifier fresh = make_classifier(cfg.arch, stream.input_dim, stream.num_classes, brng);
    for (int i = 0; i < T; ++i) {
      res.baseline[static_cast<std::size_t>(i)] += accuracy(fresh, stream.domains[static_cast<std::size_t>(i)].test);
    }
  }
  for (double& r : res.baseline) r /= cfg.baseline_models;

  for (int t = 1; t <= T; ++t) {
    const DomainSplit& d = stream.domains[static_cast<std::size_t>(t - 1)];
    if (t >= 2) res.R.set(t - 1, t, accuracy(state.model, d.test));
    begin_domain(state, cfg, t);
    DomainLog log = train_domain(state, cfg, d.train);
    end_domain(state, cfg, d.train, log);
    for (int j = 1; j <= t; ++j) res.R.set(t, j, accuracy(state.model, stream.domains[static_cast<std::size_t>(j - 1)].test));
    if (t >= 2) {
      const Method m = cfg.method.method;
      res.omega_trajectory.push_back(m == Method::kFineTune || m == Method::kJoint ? Matrix(0, 3)
                                                                                   : state.omega.materialize_matrix());
    }
    res.logs.push_back(std::move(log));
  }
  res.final_model = state.model;
  res.bank = state.bank;
  return res;
}

}  // namespace udil
