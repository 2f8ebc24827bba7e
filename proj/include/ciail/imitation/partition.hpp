#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"

namespace ciail::imitation {

enum class PartitionMode { expert_source, replay_round };

inline const char* to_string(PartitionMode m) {
  return m == PartitionMode::expert_source ? "expert_source" : "replay_round";
}

inline PartitionMode partition_mode_from_string(const std::string& s) {
  if (s == "expert_source") return PartitionMode::expert_source;
  if (s == "replay_round") return PartitionMode::replay_round;
  throw ConfigError("unknown partition mode '" + s + "'");
}

// Index-level assignment of expert and policy rows to settings. Setting k
// is keyed by an expert source id or a round bucket id (keys[k]).
struct Partition {
  PartitionMode mode = PartitionMode::expert_source;
  std::vector<int> keys;
  std::vector<std::vector<std::size_t>> expert;
  std::vector<std::vector<std::size_t>> policy;
  bool single_setting_fallback = false;

  std::size_t n_settings() const { return keys.size(); }
};

inline int round_bucket(int round_id, int span) { return round_id / span; }

namespace detail {
// Splits a shuffled index list into consecutive shares of the given sizes.
inline std::vector<std::vector<std::size_t>> split(std::vector<std::size_t> idx,
                                                   const std::vector<std::size_t>& sizes) {
  std::vector<std::vector<std::size_t>> out;
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(at),
                     idx.begin() + static_cast<std::ptrdiff_t>(at + s));
    at += s;
  }
  return out;
}

inline std::vector<std::size_t> even_shares(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> s(parts, total / parts);
  for (std::size_t k = 0; k < total % parts; ++k) ++s[k];
  return s;
}
}  // namespace detail

// Pairs each setting with rows of the other label so every setting carries
// both classes. expert_source: setting = one expert source plus an equal
// share of shuffled policy rows. replay_round: setting = policy rows of one
// round bucket plus an equally sized share of shuffled expert rows; fewer
// than two buckets collapse to a single setting.
inline Partition partition_settings(const std::vector<envs::Transition>& expert,
                                    const std::vector<envs::Transition>& policy, PartitionMode mode,
                                    int bucket_span, Rng& rng) {
  if (expert.empty() || policy.empty()) {
    throw DegenerateSettingError("partition needs expert and policy rows");
  }
  Partition p;
  p.mode = mode;
  auto shuffled = [&](std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };

  if (mode == PartitionMode::expert_source) {
    std::map<int, std::vector<std::size_t>> by_source;
    for (std::size_t i = 0; i < expert.size(); ++i) by_source[expert[i].setting_id].push_back(i);
    for (auto& [key, rows] : by_source) {
      p.keys.push_back(key);
      p.expert.push_back(rows);
    }
    p.policy = detail::split(shuffled(policy.size()), detail::even_shares(policy.size(), p.keys.size()));
  } else {
    if (bucket_span < 1) throw ConfigError("bucket span must be >= 1");
    std::map<int, std::vector<std::size_t>> by_bucket;
    for (std::size_t i = 0; i < policy.size(); ++i) {
      by_bucket[round_bucket(policy[i].round_id, bucket_span)].push_back(i);
    }
    if (by_bucket.size() < 2) {
      p.single_setting_fallback = true;
      p.keys.push_back(by_bucket.begin()->first);
      std::vector<std::size_t> all(policy.size());
      std::iota(all.begin(), all.end(), 0);
      p.policy.push_back(all);
    } else {
      for (auto& [key, rows] : by_bucket) {
        p.keys.push_back(key);
        p.policy.push_back(rows);
      }
    }
    std::vector<std::size_t> sizes;
    for (const auto& rows : p.policy) sizes.push_back(rows.size());
    // Expert shares track the bucket sizes; a short expert sample is spread evenly.
    const std::size_t want = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (expert.size() < want) sizes = detail::even_shares(expert.size(), sizes.size());
    p.expert = detail::split(shuffled(expert.size()), sizes);
  }

  for (std::size_t k = 0; k < p.keys.size(); ++k) {
    if (p.expert[k].empty() || p.policy[k].empty()) {
      throw DegenerateSettingError("setting " + std::to_string(k) + " (key " +
                                   std::to_string(p.keys[k]) + ") has only one label class");
    }
  }
  return p;
}

// True when every index in [0, n) appears in exactly one setting's list.
inline bool is_exact_cover(const std::vector<std::vector<std::size_t>>& parts, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& part : parts) {
    for (std::size_t i : part) {
      if (i >= n || seen[i]++) return false;
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

}  // namespace ciail::imitation
