#include "udil/divergence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "udil/errors.hpp"
#include "udil/losses.hpp"

namespace udil {

namespace {

std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

}  // namespace

FiniteHypothesisClass::FiniteHypothesisClass(std::size_t ground_size, std::vector<std::vector<std::uint64_t>> bitsets)
    : n_(ground_size), hyps_(std::move(bitsets)) {
  if (hyps_.empty()) throw ContractError("FiniteHypothesisClass: empty class");
  for (const auto& h : hyps_) {
    if (h.size() != words_for(n_)) throw ContractError("FiniteHypothesisClass: labeling does not cover ground set");
  }
}

FiniteHypothesisClass FiniteHypothesisClass::from_labelings(const std::vector<std::vector<int>>& labelings) {
  if (labelings.empty()) throw ContractError("FiniteHypothesisClass: empty class");
  const std::size_t n = labelings.front().size();
  std::vector<std::vector<std::uint64_t>> bits;
  for (const auto& lab : labelings) {
    if (lab.size() != n) throw ContractError("FiniteHypothesisClass: labeling does not cover ground set");
    std::vector<std::uint64_t> w(words_for(n), 0);
    for (std::size_t x = 0; x < n; ++x) {
      if (lab[x] != 0) w[x / 64] |= std::uint64_t{1} << (x % 64);
    }
    bits.push_back(std::move(w));
  }
  return FiniteHypothesisClass(n, std::move(bits));
}

FiniteHypothesisClass FiniteHypothesisClass::all_labelings(std::size_t n) {
  if (n > 20) throw ContractError("FiniteHypothesisClass::all_labelings: n too large");
  std::vector<std::vector<std::uint64_t>> bits;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << n); ++m) bits.push_back({m});
  if (n == 0) bits.resize(1);
  return FiniteHypothesisClass(n, std::move(bits));
}

FiniteHypothesisClass FiniteHypothesisClass::thresholds(std::span<const double> ground_values, bool both_orientations) {
  const std::size_t n = ground_values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ground_values[a] < ground_values[b]; });
  std::vector<std::vector<std::uint64_t>> bits;
  // Cut k labels the k largest values 1; ties share a cut.
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0 && k < n && ground_values[order[k - 1]] == ground_values[order[k]]) continue;
    std::vector<std::uint64_t> w(words_for(n), 0);
    for (std::size_t j = k; j < n; ++j) w[order[j] / 64] |= std::uint64_t{1} << (order[j] % 64);
    bits.push_back(w);
    if (both_orientations) {
      for (std::size_t q = 0; q < w.size(); ++q) w[q] = ~w[q];
      if (n % 64 != 0) w.back() &= (std::uint64_t{1} << (n % 64)) - 1;
      bits.push_back(std::move(w));
    }
  }
  return FiniteHypothesisClass(n, std::move(bits));
}

double hdh_exact(const FiniteHypothesisClass& H, std::span<const std::size_t> sample_p,
                 std::span<const std::size_t> sample_q) {
  if (sample_p.empty() || sample_q.empty()) throw ContractError("hdh_exact: empty sample");
  const std::size_t n = H.ground_size();
  // Integer weights cnt_P(x) |Q| - cnt_Q(x) |P|, scaled back once at the end,
  // so equal empirical distributions give exactly zero.
  const auto np = static_cast<std::int64_t>(sample_p.size());
  const auto nq = static_cast<std::int64_t>(sample_q.size());
  std::vector<std::int64_t> w(n, 0);
  for (std::size_t x : sample_p) {
    if (x >= n) throw ContractError("hdh_exact: sample index outside ground set");
    w[x] += nq;
  }
  for (std::size_t x : sample_q) {
    if (x >= n) throw ContractError("hdh_exact: sample index outside ground set");
    w[x] -= np;
  }

  auto gap = [&](const std::uint64_t* a, const std::uint64_t* b) {
    std::int64_t s = 0;
    for (std::size_t q = 0; q < words_for(n); ++q) {
      std::uint64_t diff = a[q] ^ b[q];
      while (diff) {
        const int bit = std::countr_zero(diff);
        s += w[q * 64 + static_cast<std::size_t>(bit)];
        diff &= diff - 1;
      }
    }
    return s < 0 ? -s : s;
  };

  std::int64_t best = 0;
  if (n <= 16) {
    // Distinct disagreement masks only.
    std::vector<char> seen(std::size_t{1} << n, 0);
    for (std::size_t i = 0; i < H.size(); ++i) {
      for (std::size_t j = i + 1; j < H.size(); ++j) seen[H.bits(i)[0] ^ H.bits(j)[0]] = 1;
    }
    const std::uint64_t zero = 0;
    for (std::uint64_t m = 1; m < seen.size(); ++m) {
      if (seen[m]) best = std::max(best, gap(&m, &zero));
    }
  } else {
    for (std::size_t i = 0; i < H.size(); ++i) {
      for (std::size_t j = i + 1; j < H.size(); ++j) best = std::max(best, gap(H.bits(i).data(), H.bits(j).data()));
    }
  }
  return std::min(2.0, 2.0 * static_cast<double>(best) / (static_cast<double>(np) * static_cast<double>(nq)));
}

double discriminator_balanced_accuracy(const Matrix& probs_current, const Matrix& probs_past, int past_domain, int t) {
  if (probs_current.rows() == 0 || probs_past.rows() == 0) {
    throw ContractError("hdh_discriminator_estimate: empty sample");
  }
  if (past_domain < 1 || past_domain >= t || probs_current.cols() < t || probs_past.cols() < t) {
    throw ContractError("hdh_discriminator_estimate: domain index outside discriminator head");
  }
  const Index i = past_domain - 1;
  const Index c = t - 1;
  double past_hits = 0.0;
  for (Index r = 0; r < probs_past.rows(); ++r) past_hits += probs_past(r, i) - probs_past(r, c) >= 0.0 ? 1.0 : 0.0;
  double cur_hits = 0.0;
  for (Index r = 0; r < probs_current.rows(); ++r) {
    cur_hits += probs_current(r, i) - probs_current(r, c) < 0.0 ? 1.0 : 0.0;
  }
  return 0.5 * (past_hits / static_cast<double>(probs_past.rows()) +
                cur_hits / static_cast<double>(probs_current.rows()));
}

double hdh_discriminator_estimate(const Mlp& discriminator, const Matrix& current_embeds, const Matrix& past_embeds,
                                  int past_domain, int t) {
  if (current_embeds.rows() == 0 || past_embeds.rows() == 0) {
    throw ContractError("hdh_discriminator_estimate: empty sample");
  }
  const double b = discriminator_balanced_accuracy(discriminator.predict(current_embeds),
                                                   discriminator.predict(past_embeds), past_domain, t);
  return std::clamp(2.0 * (2.0 * b - 1.0), 0.0, 2.0);
}

void fit_domain_discriminator(Mlp& discriminator, const Matrix& past, const Matrix& current, int steps,
                              double learning_rate, std::size_t batch, Rng& rng) {
  if (discriminator.out_dim() != 2) throw ContractError("fit_domain_discriminator: need a 2-way head");
  const auto take = [&](const Matrix& m) {
    const auto rows = sample_without_replacement(static_cast<std::size_t>(m.rows()),
                                                 std::min(batch, static_cast<std::size_t>(m.rows())), rng);
    Matrix out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(static_cast<Index>(rows[k]));
    return out;
  };
  auto params = discriminator.parameters();
  for (int s = 0; s < steps; ++s) {
    const Matrix a = take(past);
    const Matrix b = take(current);
    const std::vector<int> ya(static_cast<std::size_t>(a.rows()), 0);
    const std::vector<int> yb(static_cast<std::size_t>(b.rows()), 1);
    Var loss = classification_loss(discriminator.forward_log_probs(Var::constant(a)), ya) +
               classification_loss(discriminator.forward_log_probs(Var::constant(b)), yb);
    backward(loss);
    sgd_step(params, learning_rate);
  }
}

}  // namespace udil
