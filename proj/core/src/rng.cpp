#include "udil/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace udil {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ splitmix64(hash_name(name)));
}

Rng make_rng(std::uint64_t seed, std::string_view name) { return Rng(substream_seed(seed, name)); }

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  // Partial Fisher-Yates; the distribution object is avoided so the draw
  // sequence depends only on the engine.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t span = n - i;
    const std::size_t j = i + static_cast<std::size_t>(rng() % span);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  return sample_without_replacement(n, n, rng);
}

}  // namespace udil
