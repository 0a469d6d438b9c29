#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udil/diff.hpp"
#include "udil/mlp.hpp"
#include "udil/rng.hpp"

namespace udil {

// Explicit binary labelings of a finite ground set {0, ..., n-1}.
class FiniteHypothesisClass {
 public:
  FiniteHypothesisClass(std::size_t ground_size, std::vector<std::vector<std::uint64_t>> bitsets);

  // From 0/1 labelings, one vector per hypothesis (each of length n).
  static FiniteHypothesisClass from_labelings(const std::vector<std::vector<int>>& labelings);
  // All 2^n labelings (n <= 20).
  static FiniteHypothesisClass all_labelings(std::size_t n);
  // Thresholds 1[x >= c] for every cut of the sorted ground values, plus the
  // flipped orientation when `both_orientations`.
  static FiniteHypothesisClass thresholds(std::span<const double> ground_values, bool both_orientations = true);

  std::size_t ground_size() const { return n_; }
  std::size_t size() const { return hyps_.size(); }
  int label(std::size_t h, std::size_t x) const {
    return static_cast<int>((hyps_[h][x / 64] >> (x % 64)) & 1u);
  }
  const std::vector<std::uint64_t>& bits(std::size_t h) const { return hyps_[h]; }

 private:
  std::size_t n_;
  std::vector<std::vector<std::uint64_t>> hyps_;
};

// 2 max_{h,h'} |P[h != h'] - Q[h != h']| over the empirical distributions of
// two samples (multisets of ground-set indices). Result in [0, 2].
// Throws ContractError on an empty sample or out-of-range index.
double hdh_exact(const FiniteHypothesisClass& H, std::span<const std::size_t> sample_p,
                 std::span<const std::size_t> sample_q);

// Discriminator-based estimate for past domain `past_domain` (1-based) versus
// the current domain t. With Delta(x) = d(x)_i - d(x)_t and
//   b = 1/2 [frac(past, Delta >= 0) + frac(current, Delta < 0)],
// returns clamp(2 (2b - 1), 0, 2). Throws ContractError on empty inputs.
double hdh_discriminator_estimate(const Mlp& discriminator, const Matrix& current_embeds, const Matrix& past_embeds,
                                  int past_domain, int t);

// Balanced pairwise accuracy b used above.
double discriminator_balanced_accuracy(const Matrix& discriminator_probs_current,
                                       const Matrix& discriminator_probs_past, int past_domain, int t);

// Trains a 2-way discriminator (head index 0 = past, 1 = current) by SGD on
// cross-entropy over balanced minibatches.
void fit_domain_discriminator(Mlp& discriminator, const Matrix& past, const Matrix& current, int steps,
                              double learning_rate, std::size_t batch, Rng& rng);

}  // namespace udil
