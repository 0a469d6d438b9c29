#include <doctest.h>

#include <cmath>

#include "udil/errors.hpp"
#include "udil/mlp.hpp"

using namespace udil;

TEST_CASE("identity linear layer") {
  Rng rng(1);
  Mlp net({2, 2}, OutputHead::kLogits, rng);
  net.layers()[0].weight.data() = Matrix::Identity(2, 2);
  net.layers()[0].bias.data().setZero();
  const Matrix x{{1.0, 2.0}};
  CHECK(net.forward(Var::constant(x)).value() == x);
  CHECK(net.predict(x) == x);
}

TEST_CASE("softmax head on zero logits is uniform") {
  Rng rng(1);
  Mlp net({4, 3}, OutputHead::kSoftmax, rng);
  net.layers()[0].weight.data().setZero();
  const Matrix p = net.predict(Matrix::Ones(2, 4));
  for (Index i = 0; i < p.size(); ++i) CHECK(p.data()[i] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("two-layer ReLU network against a hand evaluation") {
  Rng rng(1);
  Mlp net({2, 2, 1}, OutputHead::kLogits, rng);
  net.layers()[0].weight.data() = Matrix{{1.0, -1.0}, {2.0, 0.5}};
  net.layers()[0].bias.data() = Matrix{{0.5, -1.0}};
  net.layers()[1].weight.data() = Matrix{{1.0}, {-2.0}};
  net.layers()[1].bias.data() = Matrix{{0.25}};
  // hidden = relu([1 + 4 + 0.5, -1 + 1 - 1]) = [5.5, 0]; out = 5.5 + 0.25
  CHECK(net.predict(Matrix{{1.0, 2.0}})(0, 0) == doctest::Approx(5.75));
  CHECK(net.forward(Var::constant(Matrix{{1.0, 2.0}})).value()(0, 0) == doctest::Approx(5.75));
}

TEST_CASE("softmax rows are distributions") {
  Rng rng(3);
  Mlp net({6, 8, 5}, OutputHead::kSoftmax, rng);
  Rng data(4);
  std::normal_distribution<double> n(0.0, 10.0);
  Matrix x(20, 6);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = n(data);
  const Matrix p = net.predict(x);
  for (Index r = 0; r < p.rows(); ++r) {
    CHECK(std::abs(p.row(r).sum() - 1.0) <= 1e-9);
    CHECK(p.row(r).minCoeff() >= 0.0);
  }
  CHECK(net.forward(Var::constant(x)).value().isApprox(p));
  CHECK(net.forward_log_probs(Var::constant(x)).value().array().exp().matrix().isApprox(p));
}

TEST_CASE("dimension errors name the layer") {
  Rng rng(1);
  Mlp net({3, 4, 2}, OutputHead::kLogits, rng);
  try {
    net.predict(Matrix::Zero(1, 5));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
  CHECK_THROWS_AS(net.forward(Var::constant(Matrix::Zero(1, 2))), DimensionError);
  CHECK_THROWS_AS(Mlp({3}, OutputHead::kLogits, rng), ConfigError);
  CHECK_THROWS_AS(net.forward_log_probs(Var::constant(Matrix::Zero(1, 3))), ContractError);
}

TEST_CASE("weights start inside the uniform fan bound, biases at zero") {
  Rng rng(9);
  Mlp net({10, 30, 4}, OutputHead::kLogits, rng);
  const double b0 = std::sqrt(6.0 / 40.0);
  const double b1 = std::sqrt(6.0 / 34.0);
  CHECK(net.layers()[0].weight.data().cwiseAbs().maxCoeff() <= b0);
  CHECK(net.layers()[1].weight.data().cwiseAbs().maxCoeff() <= b1);
  CHECK(net.layers()[0].bias.data().isZero());
  CHECK(net.layers()[0].weight.data().cwiseAbs().maxCoeff() > 0.5 * b0);
}

TEST_CASE("frozen mode passes input gradients but leaves parameters alone") {
  Rng rng(5);
  Mlp net({3, 4, 2}, OutputHead::kSoftmax, rng);
  Tensor x(Matrix{{0.3, -0.2, 0.9}}, true);
  backward(sum(net.forward(Var::leaf(x), ParamMode::kFrozen)));
  for (Tensor* p : net.parameters()) CHECK_FALSE(p->has_grad());
  CHECK(x.has_grad());

  backward(mean(net.forward_logits(Var::leaf(x))));
  for (Tensor* p : net.parameters()) CHECK(p->has_grad());
}

TEST_CASE("classifier composes encoder and predictor") {
  Rng rng(2);
  Classifier h{Mlp({4, 6}, OutputHead::kHidden, rng), Mlp({6, 3}, OutputHead::kSoftmax, rng)};
  const Matrix x = Matrix::Random(5, 4);
  CHECK(h.predict(x).isApprox(h.predictor.predict(h.embed(x))));
  CHECK(h.embed(x).minCoeff() >= 0.0);
  CHECK(h.log_probs(Var::constant(x)).value().array().exp().matrix().isApprox(h.predict(x)));
  CHECK(h.parameters().size() == 4);
  const auto before = h.checksum();
  h.predictor.layers()[0].bias.data()(0, 1) += 1e-3;
  CHECK(h.checksum() != before);
}

TEST_CASE("argmax_rows takes the first maximum") {
  CHECK(argmax_rows(Matrix{{0.2, 0.5, 0.3}, {0.5, 0.5, 0.0}}) == std::vector<int>{1, 0});
}
