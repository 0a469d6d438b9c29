#include "udil/coeffs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "udil/errors.hpp"

namespace udil {

namespace {

struct NamedMethod {
  Method method;
  std::string_view name;
};

constexpr std::array<NamedMethod, 10> kMethods{{
    {Method::kUdil, "UDIL"},
    {Method::kLwf, "LwF"},
    {Method::kEr, "ER"},
    {Method::kDerpp, "DER++"},
    {Method::kIcarl, "iCaRL"},
    {Method::kClsEr, "CLS-ER"},
    {Method::kEsmEr, "ESM-ER"},
    {Method::kBic, "BiC"},
    {Method::kFineTune, "FineTune"},
    {Method::kJoint, "Joint"},
}};

bool iequal(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& nm : kMethods) {
    if (nm.method == m) return nm.name;
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& nm : kMethods) {
    if (iequal(nm.name, name)) return nm.method;
  }
  return std::nullopt;
}

std::string valid_method_names() {
  std::string s;
  for (const auto& nm : kMethods) {
    if (!s.empty()) s += ", ";
    s += nm.name;
  }
  return s;
}

CoeffTriple softmax_triple(double a, double b, double g) {
  const double m = std::max({a, b, g});
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  const double eg = std::exp(g - m);
  const double z = ea + eb + eg;
  return {ea / z, eb / z, eg / z};
}

std::vector<CoeffTriple> CoeffSimplex::materialize() const {
  if (mode_ == CoeffMode::kFixed) return fixed_;
  std::vector<CoeffTriple> out;
  const Matrix& l = logits_.data();
  for (Index i = 0; i < l.rows(); ++i) out.push_back(softmax_triple(l(i, 0), l(i, 1), l(i, 2)));
  return out;
}

Matrix CoeffSimplex::materialize_matrix() const {
  const auto triples = materialize();
  Matrix m(static_cast<Index>(triples.size()), 3);
  for (std::size_t i = 0; i < triples.size(); ++i) {
    m(static_cast<Index>(i), 0) = triples[i].alpha;
    m(static_cast<Index>(i), 1) = triples[i].beta;
    m(static_cast<Index>(i), 2) = triples[i].gamma;
  }
  return m;
}

Var CoeffSimplex::materialize_var() {
  if (mode_ != CoeffMode::kAdaptive) throw ContractError("CoeffSimplex: fixed presets are not differentiable");
  return softmax_rows(Var::leaf(logits_));
}

CoeffSimplex CoeffSimplex::from_logits(Matrix logits) {
  if (logits.cols() != 3) throw DimensionError("CoeffSimplex::from_logits: need (t-1) x 3 logits");
  CoeffSimplex s;
  s.t_ = static_cast<int>(logits.rows()) + 1;
  s.logits_ = Tensor(std::move(logits), true);
  return s;
}

CoeffSimplex init_uniform(int t) {
  if (t < 2) throw ContractError("init_uniform: need t >= 2");
  return CoeffSimplex::from_logits(Matrix::Zero(t - 1, 3));
}

CoeffTriple preset_triple(const PresetSpec& spec, int t) {
  if (t < 2) throw ContractError("preset_triple: need t >= 2");
  const double td = static_cast<double>(t);
  switch (spec.method) {
    case Method::kUdil:
      return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    case Method::kLwf:
      return {0.0, 1.0, 0.0};
    case Method::kEr:
      return {0.0, 0.0, 1.0};
    case Method::kDerpp:
      return {0.5, 0.0, 0.5};
    case Method::kIcarl:
      return {1.0, 0.0, 0.0};
    case Method::kClsEr: {
      const double lam = spec.lambda.value_or(td - 2.0);
      if (lam < 0.0) throw ConfigError("CLS-ER: condition lambda >= 0 violated (lambda = " + std::to_string(lam) + ")");
      return {lam / (1.0 + lam), 0.0, 1.0 / (1.0 + lam)};
    }
    case Method::kEsmEr: {
      const double lam = spec.lambda_prime.value_or(spec.r * (td - 1.0) - 1.0);
      if (lam < 0.0) {
        throw ConfigError("ESM-ER: condition lambda' = r(t-1) - 1 >= 0 violated at t = " + std::to_string(t) +
                          " (lambda' = " + std::to_string(lam) + ")");
      }
      return {lam / (1.0 + lam), 0.0, 1.0 / (1.0 + lam)};
    }
    case Method::kBic: {
      const double denom = 2.0 * td - 1.0;
      return {(td - 1.0) / denom, (td - 1.0) / denom, 1.0 / denom};
    }
    case Method::kFineTune:
    case Method::kJoint:
      break;
  }
  throw ContractError("preset_triple: " + std::string(method_name(spec.method)) + " has no coefficient triple");
}

CoeffSimplex from_preset(const PresetSpec& spec, int t) {
  if (t < 2) throw ContractError("from_preset: need t >= 2");
  if (spec.method == Method::kUdil) return init_uniform(t);
  CoeffSimplex s;
  s.mode_ = CoeffMode::kFixed;
  s.method_ = spec.method;
  s.t_ = t;
  if (spec.method == Method::kFineTune || spec.method == Method::kJoint) {
    s.fixed_.assign(static_cast<std::size_t>(t - 1), CoeffTriple{});
  } else {
    s.fixed_.assign(static_cast<std::size_t>(t - 1), preset_triple(spec, t));
  }
  return s;
}

const std::vector<Method>& triple_presets() {
  static const std::vector<Method> kList{Method::kLwf,  Method::kEr,   Method::kDerpp, Method::kIcarl,
                                         Method::kClsEr, Method::kEsmEr, Method::kBic};
  return kList;
}

}  // namespace udil
