#include "udil/diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "udil/errors.hpp"

namespace udil {

namespace detail {

struct Node {
  Matrix value;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(const Matrix&, std::span<Matrix*>)> pullback;
  Tensor* leaf = nullptr;
  bool tracks = false;
};

}  // namespace detail

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                         shape_str(b.value()));
  }
}

void require_scalar(const Var& a, const char* op) {
  if (a.rows() != 1 || a.cols() != 1) {
    throw DimensionError(std::string(op) + ": expected 1x1, got " + shape_str(a.value()));
  }
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Index rows, Index cols, bool requires_grad)
    : data_(Matrix::Zero(rows, cols)), requires_grad_(requires_grad) {}

Tensor::Tensor(Matrix data, bool requires_grad) : data_(std::move(data)), requires_grad_(requires_grad) {}

const Matrix& Tensor::grad() const {
  if (!grad_) throw ContractError("Tensor::grad: no gradient accumulated");
  return *grad_;
}

void Tensor::accumulate_grad(const Matrix& g) {
  if (stop_gradient_) return;
  if (g.rows() != data_.rows() || g.cols() != data_.cols()) {
    throw DimensionError("Tensor::accumulate_grad: gradient " + shape_str(g) + " vs data " +
                         shape_str(data_));
  }
  if (grad_) {
    *grad_ += g;
  } else {
    grad_ = g;
  }
}

Tensor stop_grad(const Tensor& x) {
  Tensor out(x.data_, false);
  out.stop_gradient_ = true;
  return out;
}

// ---------------------------------------------------------------- Var

Var Var::leaf(Tensor& t) {
  auto n = std::make_shared<detail::Node>();
  n->value = t.data();
  n->tracks = t.requires_grad() && !t.stop_gradient();
  if (n->tracks) n->leaf = &t;
  return Var(std::move(n));
}

Var Var::constant(Matrix value) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

const Matrix& Var::value() const {
  if (!node_) throw ContractError("Var: use of an empty handle");
  return node_->value;
}

double Var::item() const {
  require_scalar(*this, "Var::item");
  return node_->value(0, 0);
}

bool Var::tracks_grad() const { return node_ && node_->tracks; }

Var make_node(Matrix value, std::vector<Var> inputs,
              std::function<void(const Matrix&, std::span<Matrix*>)> pullback) {
  auto n = std::make_shared<detail::Node>();
  n->value = std::move(value);
  for (auto& in : inputs) {
    n->tracks = n->tracks || in.tracks_grad();
    n->inputs.push_back(in.node_);
  }
  if (n->tracks) n->pullback = std::move(pullback);
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (!loss.valid()) throw ContractError("backward: empty loss handle");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(loss.value()));
  }
  detail::Node* root = loss.node_.get();
  if (!root->tracks) return;

  // Iterative post-order DFS over tracking nodes.
  std::vector<detail::Node*> order;
  std::unordered_map<detail::Node*, bool> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  visited[root] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->tracks && !visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<detail::Node*, Matrix> adjoint;
  adjoint[root] = Matrix::Ones(1, 1);
  std::vector<Matrix*> slots;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    auto found = adjoint.find(node);
    if (found == adjoint.end()) continue;
    const Matrix& adj = found->second;
    if (node->leaf) {
      node->leaf->accumulate_grad(adj);
      continue;
    }
    if (!node->pullback) continue;
    slots.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      detail::Node* in = node->inputs[i].get();
      if (!in->tracks) continue;
      auto [slot, inserted] = adjoint.try_emplace(in);
      if (inserted) slot->second = Matrix::Zero(in->value.rows(), in->value.cols());
      slots[i] = &slot->second;
    }
    node->pullback(adj, slots);
  }
}

Var stop_grad(const Var& x) { return Var::constant(x.value()); }

// ---------------------------------------------------------------- ops

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make_node(a.value() + b.value(), {a, b}, [](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] += g;
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make_node(a.value() - b.value(), {a, b}, [](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] -= g;
  });
}

Var operator-(const Var& a) { return a * -1.0; }

Var operator*(const Var& a, double s) {
  return make_node(a.value() * s, {a}, [s](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g * s;
  });
}

Var operator*(double s, const Var& a) { return a * s; }

Var operator+(const Var& a, double s) {
  return make_node(a.value().array() + s, {a}, [](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g;
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  Matrix av = a.value();
  Matrix bv = b.value();
  return make_node(av.cwiseProduct(bv), {a, b}, [av, bv](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g.cwiseProduct(bv);
    if (in[1]) *in[1] += g.cwiseProduct(av);
  });
}

Var scale_by(const Var& s, const Var& a) {
  require_scalar(s, "scale_by");
  const double sv = s.item();
  Matrix av = a.value();
  return make_node(av * sv, {s, a}, [sv, av](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) (*in[0])(0, 0) += g.cwiseProduct(av).sum();
    if (in[1]) *in[1] += g * sv;
  });
}

Var square(const Var& a) {
  Matrix av = a.value();
  return make_node(av.array().square(), {a}, [av](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += 2.0 * g.cwiseProduct(av);
  });
}

Var sqrt(const Var& a) {
  Matrix out = a.value().array().sqrt();
  return make_node(out, {a}, [out](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += (g.array() / (2.0 * out.array())).matrix();
  });
}

Var exp(const Var& a) {
  Matrix out = a.value().array().exp();
  return make_node(out, {a}, [out](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g.cwiseProduct(out);
  });
}

Var log(const Var& a) {
  Matrix av = a.value();
  return make_node(av.array().log(), {a}, [av](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += (g.array() / av.array()).matrix();
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_node(out, {a}, [out](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += (out.array() > 0.0).select(g, 0.0).matrix();
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a.value()) + " x " + shape_str(b.value()));
  }
  Matrix av = a.value();
  Matrix bv = b.value();
  Matrix out = av * bv;
  const bool need_a = a.tracks_grad();
  const bool need_b = b.tracks_grad();
  // Only keep the operand copies the pullback needs.
  if (!need_b) av.resize(0, 0);
  if (!need_a) bv.resize(0, 0);
  return make_node(std::move(out), {a, b},
                   [av = std::move(av), bv = std::move(bv)](const Matrix& g, std::span<Matrix*> in) {
                     if (in[0]) in[0]->noalias() += g * bv.transpose();
                     if (in[1]) in[1]->noalias() += av.transpose() * g;
                   });
}

Var add_row(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row: bias " + shape_str(bias.value()) + " vs input " + shape_str(a.value()));
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return make_node(std::move(out), {a, bias}, [](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] += g.colwise().sum();
  });
}

Var sum(const Var& a) {
  return make_node(Matrix::Constant(1, 1, a.value().sum()), {a}, [](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) in[0]->array() += g(0, 0);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ContractError("mean: empty input");
  return sum(a) * (1.0 / n);
}

Var column(const Var& a, Index j) {
  if (j < 0 || j >= a.cols()) throw DimensionError("column: index out of range");
  Matrix out = a.value().col(j);
  return make_node(std::move(out), {a}, [j](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) in[0]->col(j) += g.col(0);
  });
}

Var dot_const(const Var& a, const Matrix& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) {
    throw DimensionError("dot_const: " + shape_str(a.value()) + " vs " + shape_str(c));
  }
  return make_node(Matrix::Constant(1, 1, a.value().cwiseProduct(c).sum()), {a},
                   [c](const Matrix& g, std::span<Matrix*> in) {
                     if (in[0]) *in[0] += c * g(0, 0);
                   });
}

namespace {

Matrix row_logsumexp(const Matrix& a) {
  Matrix out(a.rows(), 1);
  for (Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    out(i, 0) = m + std::log((a.row(i).array() - m).exp().sum());
  }
  return out;
}

}  // namespace

Var softmax_rows(const Var& a) {
  const Matrix lse = row_logsumexp(a.value());
  Matrix p = (a.value().colwise() - lse.col(0)).array().exp();
  return make_node(p, {a}, [p](const Matrix& g, std::span<Matrix*> in) {
    if (!in[0]) return;
    // dL/da = p (.) (g - <g, p>_row)
    const Eigen::VectorXd inner = g.cwiseProduct(p).rowwise().sum();
    *in[0] += p.cwiseProduct(g.colwise() - inner);
  });
}

Var log_softmax_rows(const Var& a) {
  const Matrix lse = row_logsumexp(a.value());
  Matrix out = a.value().colwise() - lse.col(0);
  Matrix p = out.array().exp();
  return make_node(std::move(out), {a}, [p](const Matrix& g, std::span<Matrix*> in) {
    if (!in[0]) return;
    const Eigen::VectorXd gsum = g.rowwise().sum();
    *in[0] += g - (p.array().colwise() * gsum.array()).matrix();
  });
}

Var logsumexp_rows(const Var& a) {
  Matrix lse = row_logsumexp(a.value());
  Matrix p = (a.value().colwise() - lse.col(0)).array().exp();
  return make_node(std::move(lse), {a}, [p](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += (p.array().colwise() * g.col(0).array()).matrix();
  });
}

Var gather(const Var& a, std::vector<std::pair<Index, Index>> coords) {
  Matrix out(static_cast<Index>(coords.size()), 1);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto [r, c] = coords[k];
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw DimensionError("gather: index out of range");
    out(static_cast<Index>(k), 0) = a.value()(r, c);
  }
  return make_node(std::move(out), {a}, [coords = std::move(coords)](const Matrix& g, std::span<Matrix*> in) {
    if (!in[0]) return;
    for (std::size_t k = 0; k < coords.size(); ++k) {
      (*in[0])(coords[k].first, coords[k].second) += g(static_cast<Index>(k), 0);
    }
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) throw DimensionError("reshape: element count mismatch");
  const Index r0 = a.rows();
  const Index c0 = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return make_node(std::move(out), {a}, [r0, c0](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += Eigen::Map<const Matrix>(g.data(), r0, c0);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index at = 0;
  for (const Var& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(inputs), [offsets](const Matrix& g, std::span<Matrix*> in) {
    for (std::size_t k = 0; k < in.size(); ++k) {
      if (in[k]) *in[k] += g.middleRows(offsets[k], in[k]->rows());
    }
  });
}

Var pairwise_sqdist(const Var& a) {
  const Matrix& x = a.value();
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * x * x.transpose()).colwise() + sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  Matrix xv = x;
  return make_node(std::move(d), {a}, [xv](const Matrix& g, std::span<Matrix*> in) {
    if (!in[0]) return;
    // d_ij = |x_i - x_j|^2 ; dL/dx_i = 2 sum_j (g_ij + g_ji)(x_i - x_j)
    Matrix s = g + g.transpose();
    s.diagonal().setZero();
    const Eigen::VectorXd rs = s.rowwise().sum();
    *in[0] += 2.0 * ((xv.array().colwise() * rs.array()).matrix() - s * xv);
  });
}

Var row_sqdist_const(const Var& a, const Matrix& b) {
  if (b.rows() != a.rows() || b.cols() != a.cols()) {
    throw DimensionError("row_sqdist_const: " + shape_str(a.value()) + " vs " + shape_str(b));
  }
  Matrix diff = a.value() - b;
  Matrix out = diff.rowwise().squaredNorm();
  return make_node(std::move(out), {a}, [diff](const Matrix& g, std::span<Matrix*> in) {
    if (in[0]) *in[0] += 2.0 * (diff.array().colwise() * g.col(0).array()).matrix();
  });
}

Var nll_mean(const Var& log_probs, std::span<const int> labels) {
  const Index n = log_probs.rows();
  if (n == 0) throw ContractError("nll_mean: empty batch");
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("nll_mean: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  std::vector<std::pair<Index, Index>> coords;
  coords.reserve(labels.size());
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= log_probs.cols()) throw ContractError("nll_mean: label out of range");
    coords.emplace_back(i, y);
  }
  return mean(gather(log_probs, std::move(coords))) * -1.0;
}

Var soft_nll_mean(const Var& log_probs, const Matrix& target) {
  if (log_probs.rows() == 0) throw ContractError("soft_nll_mean: empty batch");
  if (target.rows() != log_probs.rows() || target.cols() != log_probs.cols()) {
    throw DimensionError("soft_nll_mean: target " + shape_str(target) + " vs output " + shape_str(log_probs.value()));
  }
  return dot_const(log_probs, target) * (-1.0 / static_cast<double>(log_probs.rows()));
}

// ---------------------------------------------------------------- SGD

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("sgd.learning_rate must be > 0");
  }
  if (step_count < 1) throw ConfigError("sgd.steps must be >= 1");
  if (batch_size < 1) throw ConfigError("sgd.batch_size must be >= 1");
}

void sgd_step(std::span<Tensor* const> params, double learning_rate) {
  for (Tensor* p : params) {
    if (!p->requires_grad() || p->stop_gradient()) continue;
    if (!p->has_grad()) throw ContractError("sgd_step: parameter has no gradient");
  }
  for (Tensor* p : params) {
    if (!p->requires_grad() || p->stop_gradient()) continue;
    p->data() -= learning_rate * p->grad();
    p->zero_grad();
  }
}

}  // namespace udil
