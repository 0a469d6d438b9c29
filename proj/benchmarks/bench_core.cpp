#include <benchmark/benchmark.h>

#include <random>

#include "udil/bounds.hpp"
#include "udil/divergence.hpp"
#include "udil/losses.hpp"
#include "udil/memory_bank.hpp"
#include "udil/mlp.hpp"

using namespace udil;

namespace {

Matrix gaussian(Index r, Index c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// One forward and backward pass of an MNIST-sized classifier on a minibatch.
void BM_MlpStep(benchmark::State& state) {
  Rng rng(1);
  const auto batch = static_cast<Index>(state.range(0));
  Mlp net({784, 128, 64, 10}, OutputHead::kSoftmax, rng);
  const Matrix x = gaussian(batch, 784, rng);
  std::vector<int> y(static_cast<std::size_t>(batch));
  for (auto& v : y) v = static_cast<int>(rng() % 10);
  auto params = net.parameters();
  for (auto _ : state) {
    backward(nll_mean(net.forward_log_probs(Var::constant(x)), y));
    for (Tensor* p : params) p->zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpStep)->Arg(32)->Arg(128);

void BM_ContrastiveLoss(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor e(gaussian(static_cast<Index>(n), 64, rng), true);
  std::vector<int> labels(n);
  for (auto& v : labels) v = static_cast<int>(rng() % 10);
  const auto tuples = make_contrastive_tuples(labels, 8, rng);
  for (auto _ : state) {
    backward(v_s(Var::leaf(e), tuples));
    e.zero_grad();
  }
}
BENCHMARK(BM_ContrastiveLoss)->Arg(32)->Arg(128);

void BM_ExactThresholdDivergence(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> pooled(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) pooled[i] = noise(rng) + (i < n ? -1.0 : 1.0);
  std::vector<std::size_t> p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = i;
    q[i] = n + i;
  }
  const auto cls = FiniteHypothesisClass::thresholds(pooled);
  for (auto _ : state) benchmark::DoNotOptimize(hdh_exact(cls, p, q));
}
BENCHMARK(BM_ExactThresholdDivergence)->Arg(50)->Arg(150);

void BM_BoundChecks(benchmark::State& state) {
  Rng rng(4);
  const BoundInstance inst = random_instance(RandomInstanceSpec{}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(check_intra_bound(inst));
    benchmark::DoNotOptimize(check_cross_bound(inst));
    benchmark::DoNotOptimize(check_unified_bound(inst));
  }
}
BENCHMARK(BM_BoundChecks);

void BM_MemoryBankSequence(benchmark::State& state) {
  LabeledSet domain;
  domain.inputs = Matrix::Zero(5000, 784);
  domain.labels.assign(5000, 0);
  for (auto _ : state) {
    Rng rng(5);
    MemoryBank bank(200);
    for (int t = 1; t <= 20; ++t) {
      domain.domain_id = t;
      bank.update_after_domain(domain, t, rng);
    }
    benchmark::DoNotOptimize(bank.total_size());
  }
}
BENCHMARK(BM_MemoryBankSequence);

}  // namespace

BENCHMARK_MAIN();
