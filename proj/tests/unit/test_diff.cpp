#include <doctest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "udil/diff.hpp"
#include "udil/errors.hpp"
#include "udil/mlp.hpp"

using namespace udil;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST_CASE("quadratic gradient") {
  Tensor w(Matrix{{1.0, 2.0, 3.0}}, true);
  const Var v = Var::leaf(w);
  backward(sum(hadamard(v, v)));
  CHECK(w.grad().isApprox(Matrix{{2.0, 4.0, 6.0}}));
}

TEST_CASE("gradients accumulate until cleared") {
  Tensor w(Matrix{{1.0, -1.0}}, true);
  backward(sum(Var::leaf(w) * 3.0));
  backward(sum(Var::leaf(w) * 3.0));
  CHECK(w.grad().isApprox(Matrix{{6.0, 6.0}}));
  w.zero_grad();
  CHECK_FALSE(w.has_grad());
  CHECK_THROWS_AS(w.grad(), ContractError);
}

TEST_CASE("stop_gradient cuts the graph") {
  Tensor w(Matrix{{1.0, 2.0}}, true);
  const Var cut = stop_grad(Var::leaf(w));
  backward(sum(hadamard(cut, cut)));
  CHECK_FALSE(w.has_grad());

  Tensor frozen = stop_grad(w);
  CHECK(frozen.stop_gradient());
  CHECK(frozen.data() == w.data());
  backward(sum(Var::leaf(frozen)));
  CHECK_FALSE(frozen.has_grad());
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor w(Matrix{{1.0, 2.0}}, true);
  CHECK_THROWS_AS(backward(Var::leaf(w)), ContractError);
}

TEST_CASE("tensor shape") {
  Tensor t(3, 4);
  CHECK(t.shape() == std::vector<std::size_t>{3, 4});
  CHECK(t.size() == 12);
}

TEST_CASE("sgd step and config validation") {
  Tensor w(Matrix{{1.0, 2.0}}, true);
  backward(sum(Var::leaf(w)));
  std::vector<Tensor*> ps{&w};
  sgd_step(ps, 0.5);
  CHECK(w.data().isApprox(Matrix{{0.5, 1.5}}));
  CHECK_FALSE(w.has_grad());
  CHECK_THROWS_AS(sgd_step(ps, 0.5), ContractError);

  CHECK_NOTHROW((SgdConfig{0.1, 1, 1}.validate()));
  CHECK_THROWS_AS((SgdConfig{0.0, 1, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SgdConfig{0.1, 0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SgdConfig{0.1, 1, 0}.validate()), ConfigError);
}

TEST_CASE("row-wise probability ops are stable for large logits") {
  const Var a = Var::constant(Matrix{{1000.0, 1000.0}, {-1000.0, 0.0}});
  const Matrix p = softmax_rows(a).value();
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 1) == doctest::Approx(1.0));
  const Matrix l = logsumexp_rows(a).value();
  CHECK(l(0, 0) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(l(1, 0) == doctest::Approx(0.0));
  CHECK(std::isfinite(log_softmax_rows(a).value()(1, 0)));
}

TEST_CASE("concat_rows stacks values") {
  const Var a = Var::constant(Matrix{{1.0, 2.0}});
  const Var b = Var::constant(Matrix{{3.0, 4.0}, {5.0, 6.0}});
  const std::vector<Var> parts{a, b};
  CHECK(concat_rows(parts).value() == Matrix{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}});
  const std::vector<Var> bad{a, Var::constant(Matrix::Zero(1, 3))};
  CHECK_THROWS_AS(concat_rows(bad), DimensionError);
}

TEST_CASE("every op matches central differences") {
  std::mt19937_64 rng(7);
  Tensor a(random_matrix(4, 3, rng), true);
  Tensor b(random_matrix(4, 3, rng), true);
  Tensor m(random_matrix(3, 2, rng), true);
  Tensor bias(random_matrix(1, 2, rng), true);
  Tensor s(Matrix{{0.7}}, true);
  Tensor pos((random_matrix(4, 3, rng).array().abs() + 0.5).matrix(), true);
  const Matrix target = softmax_rows(Var::constant(random_matrix(4, 3, rng))).value();
  const std::vector<int> labels{0, 2, 1, 2};

  const std::vector<std::pair<const char*, std::function<Var()>>> cases{
      {"add/sub/neg", [&] { return sum(hadamard(Var::leaf(a) + Var::leaf(b) - (-Var::leaf(a)), Var::leaf(b))); }},
      {"scale/shift", [&] { return sum(square((Var::leaf(a) * 2.5 + 1.0) * 0.3)); }},
      {"scale_by", [&] { return sum(square(scale_by(Var::leaf(s), Var::leaf(a)))); }},
      {"sqrt/log/exp", [&] { return sum(sqrt(Var::leaf(pos)) + log(Var::leaf(pos)) + exp(Var::leaf(a) * 0.2)); }},
      {"relu", [&] { return sum(square(relu(Var::leaf(a)))); }},
      {"matmul/add_row", [&] { return sum(square(add_row(matmul(Var::leaf(a), Var::leaf(m)), Var::leaf(bias)))); }},
      {"mean/column", [&] { return mean(square(column(Var::leaf(a), 1))) + mean(Var::leaf(b)); }},
      {"dot_const", [&] { return dot_const(square(Var::leaf(a)), target); }},
      {"softmax", [&] { return dot_const(softmax_rows(Var::leaf(a)), target); }},
      {"log_softmax", [&] { return dot_const(log_softmax_rows(Var::leaf(a)), target); }},
      {"logsumexp", [&] { return sum(square(logsumexp_rows(Var::leaf(a)))); }},
      {"gather/reshape", [&] {
         return sum(square(reshape(gather(Var::leaf(a), {{0, 1}, {3, 2}, {1, 0}, {0, 1}}), 2, 2)));
       }},
      {"pairwise_sqdist", [&] { return sum(sqrt(pairwise_sqdist(Var::leaf(a)) + 1.0)); }},
      {"row_sqdist_const", [&] { return sum(sqrt(row_sqdist_const(Var::leaf(a), target) + 0.1)); }},
      {"concat_rows", [&] {
         const std::vector<Var> parts{Var::leaf(a), square(Var::leaf(b))};
         return sum(square(concat_rows(parts)));
       }},
      {"nll_mean", [&] { return nll_mean(log_softmax_rows(Var::leaf(a)), labels); }},
      {"soft_nll_mean", [&] { return soft_nll_mean(log_softmax_rows(Var::leaf(a)), target); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    const auto r = testing::gradcheck(f, {&a, &b, &m, &bias, &s, &pos});
    CHECK_MESSAGE(r.failures == 0, r.first_failure);
  }
}

TEST_CASE("random two-layer MLP with cross-entropy matches central differences") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial) + 100);
    Mlp net({5, 7, 3}, OutputHead::kSoftmax, rng);
    std::mt19937_64 gen(static_cast<std::uint64_t>(trial));
    const Matrix x = random_matrix(6, 5, gen);
    const std::vector<int> y{0, 1, 2, 2, 1, 0};
    const auto r = testing::gradcheck([&] { return nll_mean(net.forward_log_probs(Var::constant(x)), y); },
                                      net.parameters());
    CHECK_MESSAGE(r.failures == 0, r.first_failure);
  }
}

TEST_CASE("the oracle flags a wrong gradient") {
  Tensor w(Matrix{{0.3, -1.2, 2.0}}, true);
  // Half of the dependence is hidden from backward, so analytic = numeric / 2.
  const auto r = testing::gradcheck([&] { return sum(square(Var::leaf(w))) + sum(square(stop_grad(Var::leaf(w)))); },
                                    {&w});
  CHECK(r.failures == 3);
  CHECK(r.worst_rel == doctest::Approx(0.5));
}
