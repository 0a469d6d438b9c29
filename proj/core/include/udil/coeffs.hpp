#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "udil/diff.hpp"

namespace udil {

enum class Method { kUdil, kLwf, kEr, kDerpp, kIcarl, kClsEr, kEsmEr, kBic, kFineTune, kJoint };

// Canonical config names: UDIL, LwF, ER, DER++, iCaRL, CLS-ER, ESM-ER, BiC,
// FineTune, Joint. Parsing is case-insensitive.
std::string_view method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
std::string valid_method_names();  // comma-separated, for error messages

// Replay coefficients of one past domain, in (alpha, beta, gamma) order:
// intra-domain distillation, cross-domain distillation, raw replay.
struct CoeffTriple {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  double sum() const { return alpha + beta + gamma; }
  bool operator==(const CoeffTriple&) const = default;
};

struct PresetSpec {
  PresetSpec() = default;
  PresetSpec(Method m) : method(m) {}

  Method method = Method::kUdil;
  std::optional<double> lambda;        // CLS-ER; default t - 2
  std::optional<double> lambda_prime;  // ESM-ER; default r (t - 1) - 1
  double r = 0.6321205588285577;       // ESM-ER unscreened ratio 1 - e^-1
};

enum class CoeffMode { kAdaptive, kFixed };

// Omega = {(alpha_i, beta_i, gamma_i)}_{i=1}^{t-1}.
//
// Adaptive mode stores one logit triple per past domain in a (t-1) x 3
// trainable Tensor; materialized triples are their row-wise softmax and so
// stay on the simplex under any gradient step. Fixed mode stores triples
// verbatim. FineTune and Joint are fixed-mode flags with no usable triples.
class CoeffSimplex {
 public:
  CoeffSimplex() = default;

  CoeffMode mode() const { return mode_; }
  Method method() const { return method_; }
  int t() const { return t_; }
  std::size_t past_domains() const { return static_cast<std::size_t>(t_ > 0 ? t_ - 1 : 0); }

  Tensor& logits() { return logits_; }
  const Tensor& logits() const { return logits_; }

  // Simplex triples; fixed mode returns presets verbatim.
  std::vector<CoeffTriple> materialize() const;
  // Same as a (t-1) x 3 matrix, columns alpha, beta, gamma.
  Matrix materialize_matrix() const;
  // Differentiable materialization (adaptive mode only).
  Var materialize_var();

  // Whether past-domain loss terms are dropped entirely (FineTune).
  bool drops_past_terms() const { return method_ == Method::kFineTune; }
  bool is_joint() const { return method_ == Method::kJoint; }

  friend CoeffSimplex init_uniform(int t);
  friend CoeffSimplex from_preset(const PresetSpec& spec, int t);
  static CoeffSimplex from_logits(Matrix logits);

 private:
  CoeffMode mode_ = CoeffMode::kAdaptive;
  Method method_ = Method::kUdil;
  int t_ = 0;
  Tensor logits_;
  std::vector<CoeffTriple> fixed_;
};

// t >= 2 past-domain count t-1; all logits zero, triples (1/3, 1/3, 1/3).
CoeffSimplex init_uniform(int t);

// Fixed triple of a preset at domain t (t >= 2). UDIL returns the uniform
// initialization. Throws ConfigError for ESM-ER when lambda' < 0.
// FineTune/Joint carry no triple and throw ContractError here.
CoeffTriple preset_triple(const PresetSpec& spec, int t);

// Fixed-mode simplex for any method (UDIL yields init_uniform).
CoeffSimplex from_preset(const PresetSpec& spec, int t);

// Methods whose preset is a simplex triple (excludes UDIL, FineTune, Joint).
const std::vector<Method>& triple_presets();

// Softmax of one logit triple.
CoeffTriple softmax_triple(double a, double b, double g);

}  // namespace udil
