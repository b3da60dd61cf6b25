#pragma once

#include "epismart/signal.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace epismart {

struct BufferEntry {
  Window window;
  int label = 0;  // 1 = seizure
  long insert_step = 0;
};

/// Fixed-capacity store of labeled windows, half-reserved per class, with
/// priority retention for the seizure class. When seizure samples are scarce
/// the slack is available to non-seizure data; when they are abundant they
/// displace non-seizure entries, and only an all-seizure buffer ever evicts
/// a seizure entry. Eviction within a class is uniformly random.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 3600, std::uint64_t seed = 0);

  /// Stores the entry; returns whatever was evicted to make room.
  std::vector<BufferEntry> insert(BufferEntry entry);

  std::vector<BufferEntry> snapshot() const;
  std::pair<std::size_t, std::size_t> class_counts() const;  // (non-seizure, seizure)

  std::size_t size() const { return parts_[0].size() + parts_[1].size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t seizure_quota() const { return capacity_ / 2; }

  /// Debug dump: JSON lines with insert_step/label/start_time_s; window
  /// payload only with include_payload.
  void dump_jsonl(std::ostream& os, bool include_payload = false) const;

 private:
  BufferEntry evict_random(int label);

  std::size_t capacity_;
  std::mt19937_64 rng_;
  std::vector<BufferEntry> parts_[2];  // [0] non-seizure, [1] seizure
};

}  // namespace epismart
