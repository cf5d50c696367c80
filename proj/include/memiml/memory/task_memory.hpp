#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "memiml/numgrad/tensor.hpp"

namespace memiml::memory {

using numgrad::Tensor;

struct MemorySlot {
  Tensor key;
  Tensor value;
};

// Diversity of a set of keys: mean minus variance of the angles between every
// ordered pair of keys, self-pairs included. Throws on an empty list or a
// zero-norm key.
double diversity_score(std::span<const Tensor> keys);

struct Neighbor {
  std::size_t index;
  double distance;
};

enum class WriteOutcome { appended, replaced, rejected };

struct WriteResult {
  WriteOutcome outcome;
  // slot written (appended or replaced); unused when rejected
  std::size_t index = 0;
  double score_before = 0.0;
  double score_after = 0.0;
};

// Fixed-capacity key-value memory for one task.
//
// While not full, writes append unconditionally. Once full, a write tries
// the candidate in place of every stored slot and keeps the substitution with
// the highest diversity score, but only if that score is strictly higher
// than the current one; otherwise the memory is left as it was.
class TaskMemory {
 public:
  explicit TaskMemory(std::size_t capacity);

  // ceil(store_ratio * support_size), at least 1.
  static std::size_t capacity_for(double store_ratio, std::size_t support_size);

  // Builds a memory directly from existing slots (e.g. a dump), bypassing the
  // write policy. Only dimensions are checked, so zero keys are accepted here;
  // diversity() on such a memory throws.
  static TaskMemory from_slots(std::size_t capacity, std::vector<MemorySlot> slots);

  WriteResult write(MemorySlot slot);

  // Up to n slots ordered by ascending Euclidean distance of their keys to
  // `query_key`; ties keep insertion order.
  std::vector<Neighbor> nearest(const Tensor& query_key, std::size_t n) const;
  std::vector<MemorySlot> read(const Tensor& query_key, std::size_t n) const;
  // Up to n distinct slots drawn uniformly at random, ignoring similarity.
  std::vector<MemorySlot> read_random(std::size_t n, std::mt19937_64& rng) const;

  double diversity() const;

  const std::vector<MemorySlot>& slots() const { return slots_; }
  std::size_t size() const { return slots_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return slots_.size() == capacity_; }
  bool empty() const { return slots_.empty(); }

  // One JSON object per line: {"slot": i, "key": [...], "value": [...]}.
  void dump_jsonl(std::ostream& out) const;

 private:
  void check_slot(const MemorySlot& slot) const;

  std::size_t capacity_;
  std::vector<MemorySlot> slots_;
};

}  // namespace memiml::memory
