#include "udil/memory_bank.hpp"

#include <algorithm>
#include <string>

#include "udil/errors.hpp"

namespace udil {

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {}

std::size_t MemoryBank::total_size() const {
  std::size_t n = 0;
  for (const auto& [id, b] : buckets_) n += b.size();
  return n;
}

const LabeledSet& MemoryBank::bucket(int domain_id) const {
  auto it = buckets_.find(domain_id);
  if (it == buckets_.end()) throw ContractError("MemoryBank: no bucket for domain " + std::to_string(domain_id));
  return it->second;
}

std::size_t MemoryBank::quota(std::size_t capacity, int t, int domain_id) {
  const auto tt = static_cast<std::size_t>(t);
  const std::size_t base = capacity / tt;
  const std::size_t extra = capacity % tt;
  return base + (static_cast<std::size_t>(domain_id) <= extra ? 1 : 0);
}

void MemoryBank::update_after_domain(const LabeledSet& current, int t, Rng& rng) {
  if (t != t_seen_ + 1) {
    throw ContractError("MemoryBank::update_after_domain: expected t = " + std::to_string(t_seen_ + 1) + ", got " +
                        std::to_string(t));
  }
  for (auto& [id, b] : buckets_) {
    const std::size_t q = quota(capacity_, t, id);
    if (b.size() > q) {
      auto keep = sample_without_replacement(b.size(), q, rng);
      std::sort(keep.begin(), keep.end());
      b = b.subset(keep);
    }
  }
  const std::size_t want = quota(capacity_, t, t);
  const std::size_t take = std::min(want, current.size());
  last_shortfall_ = want - take;
  auto rows = sample_without_replacement(current.size(), take, rng);
  LabeledSet fresh = current.subset(rows);
  fresh.domain_id = t;
  buckets_[t] = std::move(fresh);
  t_seen_ = t;
}

std::map<int, LabeledSet> MemoryBank::sample_past(std::size_t per_domain_batch, Rng& rng) const {
  std::map<int, LabeledSet> out;
  for (const auto& [id, b] : buckets_) {
    if (b.empty()) continue;
    const std::size_t k = std::min(per_domain_batch, b.size());
    out.emplace(id, b.subset(sample_without_replacement(b.size(), k, rng)));
  }
  return out;
}

MemoryBank MemoryBank::from_buckets(std::size_t capacity, int t_seen, std::map<int, LabeledSet> buckets) {
  MemoryBank bank(capacity);
  bank.t_seen_ = t_seen;
  bank.buckets_ = std::move(buckets);
  if (bank.total_size() > capacity) throw ContractError("MemoryBank::from_buckets: buckets exceed capacity");
  return bank;
}

}  // namespace udil
