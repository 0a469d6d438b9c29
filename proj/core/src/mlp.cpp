#include "udil/mlp.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "udil/errors.hpp"

namespace udil {

Mlp::Mlp(const std::vector<std::size_t>& dims, OutputHead head, Rng& rng) : head_(head) {
  if (dims.size() < 2) throw ConfigError("Mlp: need at least input and output dimension");
  for (std::size_t d : dims) {
    if (d == 0) throw ConfigError("Mlp: layer dimensions must be positive");
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan_in = static_cast<Index>(dims[l]);
    const auto fan_out = static_cast<Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = limit * unit(rng);
    layers_.push_back(DenseLayer{Tensor(std::move(w), true), Tensor(Matrix::Zero(1, fan_out), true)});
  }
}

std::size_t Mlp::in_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.rows());
}

std::size_t Mlp::out_dim() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.cols());
}

void Mlp::check_input(Index cols) const {
  if (layers_.empty()) throw ContractError("Mlp: empty network");
  if (cols != layers_.front().weight.rows()) {
    throw DimensionError("Mlp layer 0: input has " + std::to_string(cols) + " columns, layer expects " +
                         std::to_string(layers_.front().weight.rows()));
  }
}

Var Mlp::forward_logits(const Var& x, ParamMode mode) {
  check_input(x.cols());
  Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    DenseLayer& layer = layers_[l];
    if (h.cols() != layer.weight.rows()) {
      throw DimensionError("Mlp layer " + std::to_string(l) + ": input width " + std::to_string(h.cols()) +
                           " != " + std::to_string(layer.weight.rows()));
    }
    Var w = mode == ParamMode::kTrack ? Var::leaf(layer.weight) : Var::constant(layer.weight.data());
    Var b = mode == ParamMode::kTrack ? Var::leaf(layer.bias) : Var::constant(layer.bias.data());
    h = add_row(matmul(h, w), b);
    const bool last = l + 1 == layers_.size();
    if (!last) h = relu(h);
  }
  return h;
}

Var Mlp::forward(const Var& x, ParamMode mode) {
  Var out = forward_logits(x, mode);
  switch (head_) {
    case OutputHead::kSoftmax:
      return softmax_rows(out);
    case OutputHead::kHidden:
      return relu(out);
    case OutputHead::kLogits:
      break;
  }
  return out;
}

Var Mlp::forward_log_probs(const Var& x, ParamMode mode) {
  if (head_ != OutputHead::kSoftmax) throw ContractError("Mlp::forward_log_probs: network has no softmax head");
  return log_softmax_rows(forward_logits(x, mode));
}

Matrix Mlp::predict_logits(const Matrix& x) const {
  check_input(x.cols());
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix next = h * layers_[l].weight.data();
    next.rowwise() += layers_[l].bias.data().row(0);
    if (l + 1 < layers_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

Matrix Mlp::predict(const Matrix& x) const {
  Matrix out = predict_logits(x);
  switch (head_) {
    case OutputHead::kSoftmax:
      for (Index i = 0; i < out.rows(); ++i) {
        const double m = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
      }
      break;
    case OutputHead::kHidden:
      out = out.cwiseMax(0.0);
      break;
    case OutputHead::kLogits:
      break;
  }
  return out;
}

std::vector<Tensor*> Mlp::parameters() {
  std::vector<Tensor*> ps;
  for (auto& l : layers_) {
    ps.push_back(&l.weight);
    ps.push_back(&l.bias);
  }
  return ps;
}

void Mlp::zero_grad() {
  for (auto& l : layers_) {
    l.weight.zero_grad();
    l.bias.zero_grad();
  }
}

std::uint64_t Mlp::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(m.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& l : layers_) {
    mix(l.weight.data());
    mix(l.bias.data());
  }
  return h;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) {
    Index j = 0;
    m.row(i).maxCoeff(&j);
    out[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }
  return out;
}

}  // namespace udil
