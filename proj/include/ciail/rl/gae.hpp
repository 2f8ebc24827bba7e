#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ciail/errors.hpp"

namespace ciail::rl {

struct AdvantageEstimate {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// values carries one extra trailing entry: the bootstrap V(s_n) for a
// non-terminal tail. dones[t] cuts the recursion after step t.
inline AdvantageEstimate compute_gae(const std::vector<double>& rewards,
                                     const std::vector<double>& values,
                                     const std::vector<double>& dones, double gamma,
                                     double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw DimensionError("compute_gae: " + std::to_string(n) + " rewards need " +
                         std::to_string(n + 1) + " values and " + std::to_string(n) +
                         " done flags, got " + std::to_string(values.size()) + " and " +
                         std::to_string(dones.size()));
  }
  AdvantageEstimate out{std::vector<double>(n), std::vector<double>(n)};
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double live = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    acc = delta + gamma * lambda * live * acc;
    out.advantages[t] = acc;
    out.returns[t] = acc + values[t];
  }
  return out;
}

// In-place standardization with eps in the denominator.
inline void normalize(std::vector<double>& xs, double eps = 1e-8) {
  if (xs.empty()) return;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(xs.size()));
  for (double& x : xs) x = (x - mean) / (sd + eps);
}

}  // namespace ciail::rl
