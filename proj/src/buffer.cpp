#include "epismart/buffer.hpp"

#include <json.hpp>

#include <ostream>

namespace epismart {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity_ == 0) throw config_error("buffer: capacity must be positive");
}

BufferEntry ReplayBuffer::evict_random(int label) {
  auto& part = parts_[label];
  std::uniform_int_distribution<std::size_t> pick(0, part.size() - 1);
  const std::size_t i = pick(rng_);
  BufferEntry evicted = std::move(part[i]);
  part[i] = std::move(part.back());
  part.pop_back();
  return evicted;
}

std::vector<BufferEntry> ReplayBuffer::insert(BufferEntry entry) {
  if (entry.label != 0 && entry.label != 1)
    throw config_error("buffer: entry must be labeled 0 or 1");

  std::vector<BufferEntry> evicted;
  if (size() >= capacity_) {
    // Seizure entries are displaced only once no non-seizure entry remains.
    const int victim = parts_[0].empty() ? 1 : 0;
    evicted.push_back(evict_random(victim));
  }
  parts_[entry.label].push_back(std::move(entry));
  return evicted;
}

std::vector<BufferEntry> ReplayBuffer::snapshot() const {
  std::vector<BufferEntry> out;
  out.reserve(size());
  for (const auto& part : parts_)
    out.insert(out.end(), part.begin(), part.end());
  return out;
}

std::pair<std::size_t, std::size_t> ReplayBuffer::class_counts() const {
  return {parts_[0].size(), parts_[1].size()};
}

void ReplayBuffer::dump_jsonl(std::ostream& os, bool include_payload) const {
  for (const auto& part : parts_)
    for (const auto& e : part) {
      nlohmann::json j{{"insert_step", e.insert_step},
                       {"label", e.label},
                       {"start_time_s", e.window.start_time_s}};
      if (include_payload) {
        std::vector<float> flat(e.window.data.data(),
                                e.window.data.data() + e.window.data.size());
        j["data"] = flat;
        j["channels"] = e.window.data.rows();
      }
      os << j.dump() << '\n';
    }
}

}  // namespace epismart
