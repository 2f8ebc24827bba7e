#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/numcore.hpp"
#include "ciail/rl/policy.hpp"

namespace ciail::rl {

struct RolloutBatch {
  std::vector<envs::Transition> steps;
  Tensor obs;
  Tensor actions;
  std::vector<double> log_probs;
  std::vector<double> dones;
  std::vector<double> bootstrap_obs;
  std::vector<double> shaped_rewards;  // filled only by an expert-reward collector

  std::size_t size() const { return steps.size(); }
};

// Steps a policy through consecutive episodes; an episode in progress carries
// over into the next collect() call.
class RolloutCollector {
 public:
  RolloutCollector(envs::EnvSpec spec, envs::LabelSource source, bool shaped_reward = false)
      : env_(spec) {
    env_.set_label_source(source);
    if (shaped_reward) shaped_.emplace(spec);
  }

  const envs::NavEnv& env() const { return env_; }

  RolloutBatch collect(const Policy& policy, std::size_t n_steps, int round_id, Rng& rng) {
    RolloutBatch b;
    b.steps.reserve(n_steps);
    b.obs = Tensor::zeros(n_steps, env_.obs_dim());
    b.actions = Tensor::zeros(n_steps, policy.action_width());
    b.log_probs.reserve(n_steps);
    b.dones.reserve(n_steps);
    for (std::size_t t = 0; t < n_steps; ++t) {
      if (!live_) {
        obs_ = env_.reset(rng);
        if (shaped_) shaped_->reset();
        live_ = true;
      }
      const PolicySample s = policy.sample(obs_, rng);
      auto r = env_.step(s.action, rng);
      if (shaped_) b.shaped_rewards.push_back((*shaped_)(env_.agent(), env_.goal()));
      std::copy(obs_.begin(), obs_.end(), b.obs.row_span(t).begin());
      const auto row = action_row(s.action);
      std::copy(row.begin(), row.end(), b.actions.row_span(t).begin());
      b.log_probs.push_back(s.log_prob);
      b.dones.push_back(r.done ? 1.0 : 0.0);
      b.steps.push_back({obs_, s.action, r.next_obs, r.done, env_.spec().setting, round_id});
      obs_ = std::move(r.next_obs);
      live_ = !r.done;
    }
    b.bootstrap_obs = obs_;
    return b;
  }

 private:
  envs::NavEnv env_;
  std::optional<envs::ShapedExpertReward> shaped_;
  envs::Obs obs_;
  bool live_ = false;
};

struct EvalResult {
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
};

inline void summarize(EvalResult& r) {
  if (r.returns.empty()) return;
  double s = 0.0;
  for (double x : r.returns) s += x;
  r.mean = s / static_cast<double>(r.returns.size());
  double v = 0.0;
  for (double x : r.returns) v += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(v / static_cast<double>(r.returns.size()));
}

// Called after every evaluation step with the env state.
using StepObserver = std::function<void(int episode, const envs::NavEnv&)>;

// Ground-truth episode returns. The only consumer of GroundTruthReward.
inline EvalResult evaluate_policy(const Policy& policy, const envs::EnvSpec& spec, int episodes,
                                  bool deterministic, Rng& rng, const StepObserver& observe = {}) {
  envs::NavEnv env(spec);
  env.set_label_source(envs::LabelSource::policy());
  EvalResult out;
  for (int ep = 0; ep < episodes; ++ep) {
    envs::Obs obs = env.reset(rng);
    double ret = 0.0;
    bool done = false;
    while (!done) {
      const envs::Action a = deterministic ? policy.greedy(obs) : policy.sample(obs, rng).action;
      auto r = env.step(a, rng);
      ret += r.reward_gt.for_evaluation();
      if (observe) observe(ep, env);
      obs = std::move(r.next_obs);
      done = r.done;
    }
    out.returns.push_back(ret);
  }
  summarize(out);
  return out;
}

}  // namespace ciail::rl
