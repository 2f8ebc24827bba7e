#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"

namespace ciail::rl {

using envs::Transition;

// Inclusive range of round ids.
struct RoundRange {
  int first = 0;
  int last = 0;
  bool contains(int r) const { return r >= first && r <= last; }
};

// Fixed-capacity ring of transitions. Round ids must be pushed in
// nondecreasing order, so any round range maps to a contiguous slice.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  void push(Transition t) {
    if (!items_.empty() && t.round_id < at(size() - 1).round_id) {
      throw ContractError("replay push: round id " + std::to_string(t.round_id) +
                          " after " + std::to_string(at(size() - 1).round_id));
    }
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // Logical index: 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  int min_round() const { return empty() ? 0 : at(0).round_id; }
  int max_round() const { return empty() ? 0 : at(size() - 1).round_id; }

  // Logical [begin, end) slice holding the rounds in range.
  std::pair<std::size_t, std::size_t> slice(RoundRange range) const {
    std::size_t lo = 0, hi = size();
    auto first_at_least = [&](int r) {
      std::size_t a = lo, b = hi;
      while (a < b) {
        const std::size_t m = a + (b - a) / 2;
        if (at(m).round_id < r) a = m + 1;
        else b = m;
      }
      return a;
    };
    const std::size_t begin = first_at_least(range.first);
    const std::size_t end = range.last == std::numeric_limits<int>::max()
                                ? size()
                                : first_at_least(range.last + 1);
    return {begin, end};
  }

  std::size_t count(RoundRange range) const {
    auto [b, e] = slice(range);
    return e - b;
  }

  // Uniform draws with replacement, as logical indices.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (empty()) throw EmptyBucketError("replay buffer is empty");
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = uniform_index(rng, size());
    return idx;
  }

  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng, RoundRange range) const {
    auto [b, e] = slice(range);
    if (b == e) {
      throw EmptyBucketError("no transitions in rounds [" + std::to_string(range.first) + ", " +
                             std::to_string(range.last) + "]");
    }
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = b + uniform_index(rng, e - b);
    return idx;
  }

  std::vector<Transition> gather(const std::vector<std::size_t>& idx) const {
    std::vector<Transition> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(at(i));
    return out;
  }

  std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    return gather(sample_indices(n, rng));
  }
  std::vector<Transition> sample(std::size_t n, Rng& rng, RoundRange range) const {
    return gather(sample_indices(n, rng, range));
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest item once full
  std::vector<Transition> items_;
};

}  // namespace ciail::rl
