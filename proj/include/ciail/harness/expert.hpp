#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/numcore.hpp"
#include "ciail/rl/policy.hpp"
#include "ciail/rl/ppo.hpp"
#include "ciail/rl/rollout.hpp"

namespace ciail::harness {

struct ExpertConfig {
  int budget_rounds = 300;
  std::size_t rollout_steps = 2048;
  int eval_every = 5;
  int eval_episodes = 20;
  int patience = 20;            // evaluations without improvement before stopping
  int min_rounds = 100;
  double min_improvement = 0.01;  // fraction of the (best - random) return gap
  double reward_scale = 1.0;      // multiplies the shaped reward seen by PPO
  std::vector<std::size_t> hidden = {64, 64};
  numcore::Activation activation = numcore::Activation::tanh;
  rl::PpoConfig ppo = default_ppo();

  // More, smaller PPO steps per round than the imitation default: the
  // waypoint detour is a long-horizon credit assignment problem.
  static rl::PpoConfig default_ppo() {
    rl::PpoConfig c;
    c.epochs = 10;
    c.minibatch = 64;
    c.entropy_coef = 0.03;
    return c;
  }

  void validate() const {
    ppo.validate();
    if (budget_rounds < 1) throw ConfigError("expert.budget_rounds must be >= 1");
    if (rollout_steps < 1) throw ConfigError("expert.rollout_steps must be >= 1");
    if (eval_every < 1 || eval_episodes < 1) throw ConfigError("expert evaluation cadence must be positive");
    if (patience < 1 || min_rounds < 0) throw ConfigError("expert plateau settings must be positive");
  }
};

// Expert observation: agent, goal, the offsets goal - agent and
// waypoint - agent, and the waypoint-reached flag. The flag makes the
// phase-switch reward Markov for the expert. Imitators never see any of this:
// they learn from the env observation recorded in the demos. On spur_point
// the spurious channel is dropped before the expert sees anything.
inline constexpr std::size_t kExpertObsDim = 9;

inline envs::EnvSpec expert_env(envs::EnvSpec spec) {
  if (spec.id == envs::EnvId::spur_point) spec.id = envs::EnvId::move_point;
  return spec;
}

inline std::vector<double> expert_obs(const envs::Obs& o, const envs::Vec2& waypoint, bool reached) {
  return {o[0], o[1], o[2], o[3], o[2] - o[0], o[3] - o[1], waypoint[0] - o[0], waypoint[1] - o[1],
          reached ? 1.0 : 0.0};
}

inline std::vector<double> expert_obs(const envs::Obs& o, const envs::ShapedExpertReward& sh) {
  return expert_obs(o, sh.waypoint(), sh.reached());
}

struct ShapedEval {
  std::vector<double> shaped;  // expert-reward returns
  std::vector<double> gt;      // ground-truth returns
  double shaped_mean = 0.0;
  double gt_mean = 0.0;
  double gt_std = 0.0;
  double waypoint_rate = 0.0;  // episodes that came within the radius of the waypoint
};

// Controller view of one step: env observation, env state, shaped-reward phase.
using ActionFn = std::function<envs::Action(const envs::Obs&, const envs::NavEnv&,
                                            const envs::ShapedExpertReward&, Rng&)>;

// Rolls episodes with a caller-supplied controller, scoring both rewards.
inline ShapedEval evaluate_shaped(const ActionFn& act, const envs::EnvSpec& spec, int episodes, Rng& rng) {
  envs::NavEnv env(spec);
  envs::ShapedExpertReward shaped(spec);
  ShapedEval out;
  int hits = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    envs::Obs obs = env.reset(rng);
    shaped.reset();
    double rs = 0.0, rg = 0.0;
    bool done = false;
    while (!done) {
      auto r = env.step(act(obs, env, shaped, rng), rng);
      rs += shaped(env.agent(), env.goal());
      rg += r.reward_gt.for_evaluation();
      obs = std::move(r.next_obs);
      done = r.done;
    }
    hits += shaped.reached() ? 1 : 0;
    out.shaped.push_back(rs);
    out.gt.push_back(rg);
  }
  rl::EvalResult g{out.gt};
  rl::summarize(g);
  rl::EvalResult s{out.shaped};
  rl::summarize(s);
  out.shaped_mean = s.mean;
  out.gt_mean = g.mean;
  out.gt_std = g.std;
  out.waypoint_rate = static_cast<double>(hits) / static_cast<double>(episodes);
  return out;
}

inline ActionFn policy_controller(const rl::Policy& policy, bool deterministic) {
  return [&policy, deterministic](const envs::Obs& o, const envs::NavEnv&,
                                  const envs::ShapedExpertReward& sh, Rng& rng) {
    const auto x = expert_obs(o, sh);
    return deterministic ? policy.greedy(x) : policy.sample(x, rng).action;
  };
}

inline ActionFn random_controller(bool discrete) {
  return [discrete](const envs::Obs&, const envs::NavEnv&, const envs::ShapedExpertReward&,
                    Rng& rng) -> envs::Action {
    if (discrete) return static_cast<int>(uniform_index(rng, envs::kNumMoves));
    return envs::Vec2{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
  };
}

// Straight to the goal, ignoring any waypoint.
inline ActionFn oracle_controller(bool discrete, double step) {
  return [discrete, step](const envs::Obs&, const envs::NavEnv& env, const envs::ShapedExpertReward&, Rng&) {
    return envs::scripted_action(env.agent(), env.goal(), discrete, step);
  };
}

// On-policy batch for the expert, rewarded by the shaped expert reward.
// Episodes carry over between calls like rl::RolloutCollector.
class ExpertCollector {
 public:
  explicit ExpertCollector(const envs::EnvSpec& spec) : env_(spec), shaped_(spec) {}

  rl::PpoBatch collect(const rl::Policy& policy, std::size_t n, double reward_scale, Rng& rng) {
    rl::PpoBatch b;
    b.obs = numcore::Tensor::zeros(n, kExpertObsDim);
    b.actions = numcore::Tensor::zeros(n, policy.action_width());
    for (std::size_t t = 0; t < n; ++t) {
      if (!live_) {
        obs_ = env_.reset(rng);
        shaped_.reset();
        live_ = true;
      }
      const auto x = expert_obs(obs_, shaped_);
      const rl::PolicySample s = policy.sample(x, rng);
      auto r = env_.step(s.action, rng);
      b.rewards.push_back(reward_scale * shaped_(env_.agent(), env_.goal()));
      std::copy(x.begin(), x.end(), b.obs.row_span(t).begin());
      const auto row = rl::action_row(s.action);
      std::copy(row.begin(), row.end(), b.actions.row_span(t).begin());
      b.log_probs.push_back(s.log_prob);
      b.dones.push_back(r.done ? 1.0 : 0.0);
      obs_ = std::move(r.next_obs);
      live_ = !r.done;
    }
    b.bootstrap_obs = expert_obs(obs_, shaped_);
    b.reward_source = rl::RewardSource::expert_shaped;
    return b;
  }

 private:
  envs::NavEnv env_;
  envs::ShapedExpertReward shaped_;
  envs::Obs obs_;
  bool live_ = false;
};

struct ExpertEvalPoint {
  int round = 0;
  double shaped_mean = 0.0;
  double gt_mean = 0.0;
  double waypoint_rate = 0.0;
};

struct ExpertResult {
  std::unique_ptr<rl::Policy> policy;
  std::vector<ExpertEvalPoint> curve;
  int rounds_run = 0;
  bool plateaued = false;
  double random_shaped = 0.0;  // uniform-random controller on the same eval episodes
  double best_shaped = -std::numeric_limits<double>::infinity();
  ShapedEval final_eval;       // deterministic, on the fixed eval episodes
  ShapedEval stochastic_eval;  // sampled actions, as used for demonstrations

  // (R - R_random) / (R_best - R_random) on the expert's own reward.
  double normalized_final() const {
    const double gap = best_shaped - random_shaped;
    return gap > 0.0 ? (final_eval.shaped_mean - random_shaped) / gap : 0.0;
  }
};

// PPO on the setting's shaped expert reward until the evaluated return
// plateaus or the round budget runs out.
inline ExpertResult gen_expert(envs::EnvSpec spec, int setting, const ExpertConfig& cfg, std::uint64_t seed,
                               const std::function<void(const ExpertEvalPoint&)>& progress = {}) {
  cfg.validate();
  spec = expert_env(spec);
  spec.setting = setting;
  envs::validate(spec);

  Rng init(derive_seed(seed, 1));
  const auto space = envs::action_space(spec.id);
  rl::PpoLearner learner(rl::make_policy(kExpertObsDim, space, cfg.hidden, cfg.activation, init),
                         rl::make_value_net(kExpertObsDim, cfg.hidden, cfg.activation, init), cfg.ppo);
  ExpertCollector collector(spec);
  Rng rng(derive_seed(seed, 2));

  // Every evaluation replays the same episode starts.
  const std::uint64_t eval_seed = derive_seed(seed, 3);
  ExpertResult res;
  {
    Rng r(eval_seed);
    res.random_shaped = evaluate_shaped(random_controller(space.discrete), spec, cfg.eval_episodes, r).shaped_mean;
  }

  int since_best = 0;
  for (int round = 0; round < cfg.budget_rounds; ++round) {
    learner.update(collector.collect(learner.policy(), cfg.rollout_steps, cfg.reward_scale, rng), rng);
    res.rounds_run = round + 1;

    const bool last = round + 1 == cfg.budget_rounds;
    if ((round + 1) % cfg.eval_every != 0 && !last) continue;
    Rng r(eval_seed);
    res.final_eval = evaluate_shaped(policy_controller(learner.policy(), true), spec, cfg.eval_episodes, r);
    const ExpertEvalPoint pt{round, res.final_eval.shaped_mean, res.final_eval.gt_mean,
                             res.final_eval.waypoint_rate};
    res.curve.push_back(pt);
    if (progress) progress(pt);

    const double gap = std::max(res.best_shaped - res.random_shaped, 0.0);
    if (pt.shaped_mean > res.best_shaped + cfg.min_improvement * gap) {
      since_best = 0;
    } else {
      ++since_best;
    }
    res.best_shaped = std::max(res.best_shaped, pt.shaped_mean);
    if (round + 1 >= cfg.min_rounds && since_best >= cfg.patience) {
      res.plateaued = true;
      break;
    }
  }
  res.policy = learner.policy().clone();
  Rng r(derive_seed(seed, 4));
  res.stochastic_eval = evaluate_shaped(policy_controller(*res.policy, false), spec, cfg.eval_episodes, r);
  return res;
}

}  // namespace ciail::harness
