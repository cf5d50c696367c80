#include "memiml/memory/task_memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace memiml::memory {

namespace {

double norm(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

// Angle between a and b via 2*atan2(|u - v|, |u + v|) on the unit vectors.
// Same value as arccos of the clamped cosine, but exact for parallel keys
// where arccos near 1 loses half its digits.
double angle(const Tensor& a, double na, const Tensor& b, double nb) {
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double u = a[i] / na, v = b[i] / nb;
    diff += (u - v) * (u - v);
    sum += (u + v) * (u + v);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

// mean - variance over an n x n matrix of pairwise angles
double score_from_angles(const std::vector<double>& angles) {
  const double n = static_cast<double>(angles.size());
  const double mean = std::accumulate(angles.begin(), angles.end(), 0.0) / n;
  double var = 0.0;
  for (double a : angles) var += (a - mean) * (a - mean);
  return mean - var / n;
}

}  // namespace

double diversity_score(std::span<const Tensor> keys) {
  if (keys.empty()) throw std::invalid_argument("diversity_score of an empty key list");
  std::vector<double> norms;
  norms.reserve(keys.size());
  for (const auto& k : keys) {
    const double n = norm(k);
    if (n == 0.0) throw std::invalid_argument("diversity_score: zero-norm key");
    if (k.size() != keys.front().size()) throw numgrad::ShapeError("diversity_score: key widths differ");
    norms.push_back(n);
  }
  std::vector<double> angles;
  angles.reserve(keys.size() * keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    for (std::size_t h = 0; h < keys.size(); ++h) {
      angles.push_back(j == h ? 0.0 : angle(keys[j], norms[j], keys[h], norms[h]));
    }
  }
  return score_from_angles(angles);
}

TaskMemory::TaskMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("memory capacity must be positive");
  slots_.reserve(capacity);
}

std::size_t TaskMemory::capacity_for(double store_ratio, std::size_t support_size) {
  if (!(store_ratio > 0.0 && store_ratio <= 1.0)) throw std::invalid_argument("store ratio must be in (0, 1]");
  // the epsilon keeps e.g. 0.7 * 10 from rounding up to 8
  const double raw = store_ratio * static_cast<double>(support_size);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

TaskMemory TaskMemory::from_slots(std::size_t capacity, std::vector<MemorySlot> slots) {
  if (slots.size() > capacity) throw std::invalid_argument("more slots than capacity");
  TaskMemory mem(capacity);
  for (auto& s : slots) {
    if (s.key.empty() || s.value.empty()) throw numgrad::ShapeError("memory slot with an empty key or value");
    if (!mem.slots_.empty() && (s.key.size() != mem.slots_.front().key.size() ||
                                s.value.size() != mem.slots_.front().value.size())) {
      throw numgrad::ShapeError("memory slot width mismatch");
    }
    mem.slots_.push_back(std::move(s));
  }
  return mem;
}

void TaskMemory::check_slot(const MemorySlot& slot) const {
  if (slot.key.empty() || slot.value.empty()) throw numgrad::ShapeError("memory slot with an empty key or value");
  if (norm(slot.key) == 0.0) throw std::invalid_argument("memory keys must be nonzero");
  if (!slots_.empty()) {
    if (slot.key.size() != slots_.front().key.size()) throw numgrad::ShapeError("memory key width mismatch");
    if (slot.value.size() != slots_.front().value.size()) throw numgrad::ShapeError("memory value width mismatch");
  }
}

WriteResult TaskMemory::write(MemorySlot slot) {
  check_slot(slot);
  if (!full()) {
    slots_.push_back(std::move(slot));
    return {WriteOutcome::appended, slots_.size() - 1, 0.0, 0.0};
  }

  const std::size_t n = slots_.size();
  std::vector<const Tensor*> keys;
  keys.reserve(n + 1);
  for (const auto& s : slots_) keys.push_back(&s.key);
  keys.push_back(&slot.key);
  std::vector<double> norms;
  for (const auto* k : keys) norms.push_back(norm(*k));

  // angles among stored keys plus the candidate (index n)
  std::vector<double> table((n + 1) * (n + 1), 0.0);
  for (std::size_t a = 0; a <= n; ++a) {
    for (std::size_t b = a + 1; b <= n; ++b) {
      table[a * (n + 1) + b] = table[b * (n + 1) + a] = angle(*keys[a], norms[a], *keys[b], norms[b]);
    }
  }
  auto score_with = [&](std::size_t replaced) {
    // members: every stored index except `replaced`, which becomes the candidate
    std::vector<std::size_t> members(n);
    std::iota(members.begin(), members.end(), 0);
    if (replaced < n) members[replaced] = n;
    std::vector<double> angles;
    angles.reserve(n * n);
    for (auto a : members) {
      for (auto b : members) angles.push_back(table[a * (n + 1) + b]);
    }
    return score_from_angles(angles);
  };

  const double current = score_with(n);
  double best = current;
  std::size_t best_index = n;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = score_with(i);
    if (s > best) {
      best = s;
      best_index = i;
    }
  }
  if (best_index == n) return {WriteOutcome::rejected, 0, current, current};
  slots_[best_index] = std::move(slot);
  return {WriteOutcome::replaced, best_index, current, best};
}

std::vector<Neighbor> TaskMemory::nearest(const Tensor& query_key, std::size_t n) const {
  if (slots_.empty()) throw std::logic_error("read from an empty memory");
  if (query_key.size() != slots_.front().key.size()) throw numgrad::ShapeError("query key width mismatch");
  std::vector<Neighbor> all;
  all.reserve(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    double s = 0.0;
    const auto& k = slots_[i].key;
    for (std::size_t d = 0; d < k.size(); ++d) s += (k[d] - query_key[d]) * (k[d] - query_key[d]);
    all.push_back({i, std::sqrt(s)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
  all.resize(std::min(n, all.size()));
  return all;
}

std::vector<MemorySlot> TaskMemory::read(const Tensor& query_key, std::size_t n) const {
  std::vector<MemorySlot> out;
  for (const auto& nb : nearest(query_key, n)) out.push_back(slots_[nb.index]);
  return out;
}

std::vector<MemorySlot> TaskMemory::read_random(std::size_t n, std::mt19937_64& rng) const {
  if (slots_.empty()) throw std::logic_error("read from an empty memory");
  std::vector<std::size_t> order(slots_.size());
  std::iota(order.begin(), order.end(), 0);
  // partial Fisher-Yates with explicit draws so the sequence is portable
  const std::size_t take = std::min(n, order.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<MemorySlot> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(slots_[order[i]]);
  return out;
}

double TaskMemory::diversity() const {
  std::vector<Tensor> keys;
  for (const auto& s : slots_) keys.push_back(s.key);
  return diversity_score(keys);
}

void TaskMemory::dump_jsonl(std::ostream& out) const {
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    out << nlohmann::json{{"slot", i}, {"key", slots_[i].key.values()}, {"value", slots_[i].value.values()}}.dump()
        << '\n';
  }
}

}  // namespace memiml::memory
