#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// Two layers:
//   * Tensor  - a value-semantic parameter/data array with an optional
//               gradient slot. Copying a Tensor copies its data.
//   * Var     - a handle to a node of a dynamically recorded expression graph.
//               Leaves created with Var::leaf(tensor) route their adjoint back
//               into tensor.grad() when backward() runs.
//
// Every array is 2-D (scalars are 1x1). Gradients accumulate (+=) across
// backward() calls until sgd_step() or Tensor::zero_grad() clears them.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace udil {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Index rows, Index cols, bool requires_grad = false);
  explicit Tensor(Matrix data, bool requires_grad = false);

  std::vector<std::size_t> shape() const {
    return {static_cast<std::size_t>(data_.rows()), static_cast<std::size_t>(data_.cols())};
  }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }
  Index size() const { return data_.size(); }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  bool has_grad() const { return grad_.has_value(); }
  // Throws ContractError when no gradient has been accumulated.
  const Matrix& grad() const;
  void accumulate_grad(const Matrix& g);
  void zero_grad() { grad_.reset(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }
  bool stop_gradient() const { return stop_gradient_; }

  friend Tensor stop_grad(const Tensor& x);

 private:
  Matrix data_;
  std::optional<Matrix> grad_;
  bool requires_grad_ = false;
  bool stop_gradient_ = false;
};

// Value-equal copy flagged stop_gradient: never accumulates or propagates.
Tensor stop_grad(const Tensor& x);

namespace detail {
struct Node;
}

class Var {
 public:
  Var() = default;

  // Graph leaf bound to `t`. The tensor must outlive the graph.
  static Var leaf(Tensor& t);
  static Var constant(Matrix value);
  static Var scalar(double v);

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double item() const;  // value of a 1x1 Var
  bool tracks_grad() const;
  bool valid() const { return static_cast<bool>(node_); }

 private:
  friend struct detail::Node;
  friend Var make_node(Matrix value, std::vector<Var> inputs,
                       std::function<void(const Matrix& adjoint, std::span<Matrix*> input_adjoints)> pullback);
  friend void backward(const Var& loss);

  explicit Var(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Creates an interior node. `pullback` receives the node's adjoint and one
// adjoint accumulator per input (nullptr for inputs that do not track grads)
// and must add its contribution into each non-null accumulator.
Var make_node(Matrix value, std::vector<Var> inputs,
              std::function<void(const Matrix& adjoint, std::span<Matrix*> input_adjoints)> pullback);

// Propagates d(loss)/d(leaf) into every reachable tracked leaf tensor.
// Throws ContractError unless `loss` is 1x1.
void backward(const Var& loss);

// Value-equal Var cut from the graph.
Var stop_grad(const Var& x);

// ---- elementwise / algebraic ----
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, double s);
Var operator*(double s, const Var& a);
Var operator+(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
// Scalar (1x1) times matrix.
Var scale_by(const Var& s, const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);
// a (n x m) + bias (1 x m) broadcast over rows.
Var add_row(const Var& a, const Var& bias);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
// Column j as an (n x 1) Var.
Var column(const Var& a, Index j);
// Sum of a (.) c for a constant c of the same shape.
Var dot_const(const Var& a, const Matrix& c);

// ---- row-wise probability ops (log-sum-exp stabilized) ----
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
// (n x 1) log-sum-exp of each row.
Var logsumexp_rows(const Var& a);

// ---- structural ----
// (k x 1) of a(r_i, c_i).
Var gather(const Var& a, std::vector<std::pair<Index, Index>> coords);
// Reshape (row-major order preserved).
Var reshape(const Var& a, Index rows, Index cols);
// Vertical stack of inputs sharing a column count.
Var concat_rows(std::span<const Var> parts);
// Pairwise squared Euclidean distances between the rows of a: (n x n).
Var pairwise_sqdist(const Var& a);
// Row-wise squared distance between a and a constant b: (n x 1).
Var row_sqdist_const(const Var& a, const Matrix& b);

// Mean over rows of -log_probs(i, labels[i]).
Var nll_mean(const Var& log_probs, std::span<const int> labels);
// Mean over rows of -sum_j target(i,j) * log_probs(i,j); target is constant.
Var soft_nll_mean(const Var& log_probs, const Matrix& target);

struct SgdConfig {
  double learning_rate = 0.01;
  int step_count = 1;
  int batch_size = 32;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// p <- p - lr * grad(p) for every parameter; grads are cleared afterwards.
// Throws ContractError if a requires_grad parameter has no gradient.
void sgd_step(std::span<Tensor* const> params, double learning_rate);
inline void sgd_step(std::span<Tensor* const> params, const SgdConfig& cfg) {
  sgd_step(params, cfg.learning_rate);
}

}  // namespace udil
