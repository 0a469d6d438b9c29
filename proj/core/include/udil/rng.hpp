#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace udil {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a over the bytes of `name`.
std::uint64_t hash_name(std::string_view name);

// Seed of the named substream of `seed`:
//   splitmix64(seed ^ splitmix64(fnv1a(name)))
// Streams with different names are decorrelated, so e.g. changing the batch
// size (which consumes the "sampling" stream) never perturbs "data".
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

Rng make_rng(std::uint64_t seed, std::string_view name);

// Uniform draw of `k` distinct indices from [0, n), in draw order.
// Requires k <= n.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

// Uniform random permutation of [0, n).
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

}  // namespace udil
