#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"
#include "ciail/numcore.hpp"
#include "ciail/rl/policy.hpp"

// Policy checkpoints: numcore checkpoint records "policy.*" plus a few
// "meta.*" tensors describing what the network expects.

namespace ciail::harness {

enum class PolicyRole { imitator = 0, expert = 1 };

struct PolicyMeta {
  PolicyRole role = PolicyRole::imitator;
  envs::EnvId env = envs::EnvId::move_point;
  std::size_t obs_dim = 4;
  bool discrete = true;
  int setting = -1;           // experts only
  std::vector<double> stats;  // free-form summary numbers, see ExpertStats
};

// Summary numbers stored with an expert checkpoint.
struct ExpertStats {
  double gt_mean = 0.0;  // stochastic-policy ground-truth return
  double gt_std = 0.0;
  double shaped_best = 0.0;
  double shaped_final = 0.0;
  double shaped_random = 0.0;
  double waypoint_rate = 0.0;
  double rounds = 0.0;

  std::vector<double> pack() const {
    return {gt_mean, gt_std, shaped_best, shaped_final, shaped_random, waypoint_rate, rounds};
  }
  static ExpertStats unpack(const std::vector<double>& v) {
    if (v.size() != 7) throw LoadError("expert checkpoint carries malformed stats");
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
};

inline std::vector<numcore::NamedTensor> policy_records(const rl::Policy& p, const PolicyMeta& m) {
  using numcore::Tensor;
  std::vector<numcore::NamedTensor> out;
  out.push_back({"meta.role", Tensor::filled(1, 1, static_cast<double>(m.role))});
  out.push_back({"meta.env", Tensor::filled(1, 1, static_cast<double>(m.env))});
  out.push_back({"meta.obs_dim", Tensor::filled(1, 1, static_cast<double>(m.obs_dim))});
  out.push_back({"meta.discrete", Tensor::filled(1, 1, m.discrete ? 1.0 : 0.0)});
  out.push_back({"meta.setting", Tensor::filled(1, 1, static_cast<double>(m.setting))});
  if (!m.stats.empty()) out.push_back({"meta.stats", Tensor::row(m.stats)});
  numcore::append_mlp(out, "policy", p.net());
  return out;
}

inline void save_policy(const std::string& path, const rl::Policy& p, const PolicyMeta& m) {
  numcore::save_checkpoint(path, policy_records(p, m));
}

inline PolicyMeta read_meta(const std::vector<numcore::NamedTensor>& recs) {
  auto scalar = [&](const char* name) { return numcore::find_tensor(recs, name)[0]; };
  PolicyMeta m;
  const double env = scalar("meta.env");
  if (env < 0 || env > 2) throw LoadError("checkpoint names an unknown environment");
  m.role = scalar("meta.role") == 1.0 ? PolicyRole::expert : PolicyRole::imitator;
  m.env = static_cast<envs::EnvId>(static_cast<int>(env));
  m.obs_dim = static_cast<std::size_t>(scalar("meta.obs_dim"));
  m.discrete = scalar("meta.discrete") == 1.0;
  m.setting = static_cast<int>(scalar("meta.setting"));
  if (numcore::has_tensor(recs, "meta.stats")) {
    const auto& t = numcore::find_tensor(recs, "meta.stats");
    m.stats.assign(t.data().begin(), t.data().end());
  }
  return m;
}

struct LoadedPolicy {
  std::unique_ptr<rl::Policy> policy;
  PolicyMeta meta;
};

// Rebuilds the network with the given architecture and restores weights.
// Shape or action-space disagreement is a LoadError.
inline LoadedPolicy load_policy(const std::string& path, const std::vector<std::size_t>& hidden,
                                numcore::Activation act) {
  const auto recs = numcore::load_checkpoint(path);
  LoadedPolicy out;
  out.meta = read_meta(recs);
  const envs::ActionSpace space = envs::action_space(out.meta.env);
  if (space.discrete != out.meta.discrete) throw LoadError("checkpoint action space disagrees with its env");
  Rng rng(0);
  out.policy = rl::make_policy(out.meta.obs_dim, space, hidden, act, rng);
  numcore::restore_mlp(recs, "policy", out.policy->net());
  return out;
}

}  // namespace ciail::harness
