#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "udil/data.hpp"
#include "udil/rng.hpp"

namespace udil {

// Capacity-bounded exemplar memory with one bucket per past domain.
//
// After domain t the capacity is re-partitioned into t near-equal quotas
// (floor or ceil of capacity/t, the larger ones going to lower domain ids).
// Past buckets shrink by uniform random eviction; the new domain's bucket is
// a uniform without-replacement draw from its training set.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity = 0);

  std::size_t capacity() const { return capacity_; }
  int domains_seen() const { return t_seen_; }
  std::size_t total_size() const;
  bool empty() const { return buckets_.empty(); }

  // Bucket of domain `domain_id` (1-based). Throws ContractError if absent.
  const LabeledSet& bucket(int domain_id) const;
  const std::map<int, LabeledSet>& buckets() const { return buckets_; }

  // Exemplars the last update wanted but the domain could not supply.
  std::size_t last_shortfall() const { return last_shortfall_; }

  // Quota of `domain_id` when `t` domains share `capacity`.
  static std::size_t quota(std::size_t capacity, int t, int domain_id);

  // Requires t == domains_seen() + 1 (ContractError otherwise).
  void update_after_domain(const LabeledSet& current, int t, Rng& rng);

  // Uniform without-replacement draw of min(per_domain_batch, |M_i|) rows
  // from every bucket. Empty map when nothing is stored yet.
  std::map<int, LabeledSet> sample_past(std::size_t per_domain_batch, Rng& rng) const;

  // Rebuilds a bank from persisted buckets (checkpoint loading).
  static MemoryBank from_buckets(std::size_t capacity, int t_seen, std::map<int, LabeledSet> buckets);

 private:
  std::size_t capacity_ = 0;
  int t_seen_ = 0;
  std::size_t last_shortfall_ = 0;
  std::map<int, LabeledSet> buckets_;
};

}  // namespace udil
