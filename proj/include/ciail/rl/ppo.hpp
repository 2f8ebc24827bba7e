#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore.hpp"
#include "ciail/rl/gae.hpp"
#include "ciail/rl/policy.hpp"

namespace ciail::rl {

// Provenance of the rewards handed to an optimizer. Ground truth is only ever
// produced by evaluation code; optimizers refuse it.
enum class RewardSource { unset, discriminator, expert_shaped, ground_truth };

inline const char* to_string(RewardSource s) {
  switch (s) {
    case RewardSource::unset: return "unset";
    case RewardSource::discriminator: return "discriminator";
    case RewardSource::expert_shaped: return "expert_shaped";
    case RewardSource::ground_truth: return "ground_truth";
  }
  return "?";
}

inline void check_reward_source(RewardSource s) {
  if (s != RewardSource::discriminator && s != RewardSource::expert_shaped) {
    throw TaintError(std::string("optimizer received rewards from source '") + to_string(s) + "'");
  }
}

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 4;
  std::size_t minibatch = 256;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lr = 3e-4;
  double max_grad_norm = 10.0;
  double target_kl = 0.02;  // an epoch whose KL estimate exceeds 10x this stops the update

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo.gamma must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo.gae_lambda must lie in [0, 1]");
    if (!(clip > 0.0)) throw ConfigError("ppo.clip must be positive");
    if (epochs < 1) throw ConfigError("ppo.epochs must be >= 1");
    if (minibatch < 1) throw ConfigError("ppo.minibatch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("ppo.lr must be positive");
    if (value_coef < 0.0 || entropy_coef < 0.0) throw ConfigError("ppo coefficients must be nonnegative");
    if (!(target_kl > 0.0)) throw ConfigError("ppo.target_kl must be positive");
  }
};

// One on-policy batch. bootstrap_obs is the observation after the last step,
// used only if that step is not terminal.
struct PpoBatch {
  Tensor obs;
  Tensor actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> dones;
  std::vector<double> bootstrap_obs;
  RewardSource reward_source = RewardSource::unset;

  std::size_t size() const { return rewards.size(); }
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
};

inline Mlp make_value_net(std::size_t obs_dim, const std::vector<std::size_t>& hidden,
                          numcore::Activation act, Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(obs_dim);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(1);
  spec.hidden = act;
  return Mlp(spec, rng);
}

struct PpoLossGraph {
  Var total;
  Var policy_loss;
  Var value_loss;
  Var entropy;
  Var log_prob;
  PolicyGraph policy;
  MlpTrace value;
};

// Clipped surrogate + value regression - entropy bonus on one minibatch.
inline PpoLossGraph ppo_loss(Tape& tape, const Policy& policy, const Mlp& value, const Tensor& obs,
                             const Tensor& actions, const Tensor& old_log_probs,
                             const Tensor& advantages, const Tensor& returns, const PpoConfig& cfg) {
  PpoLossGraph g;
  g.policy = policy.graph(tape, obs, actions);
  g.log_prob = g.policy.log_prob;
  Var adv = tape.constant(advantages);
  Var ratio = numcore::exp(g.policy.log_prob - tape.constant(old_log_probs));
  Var surr1 = ratio * adv;
  Var surr2 = numcore::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
  g.policy_loss = -numcore::mean(numcore::minimum(surr1, surr2));
  g.value = value.trace(tape, tape.constant(obs));
  g.value_loss = numcore::mean(numcore::square(g.value.output - tape.constant(returns)));
  g.entropy = numcore::mean(g.policy.entropy);
  g.total = g.policy_loss + cfg.value_coef * g.value_loss - cfg.entropy_coef * g.entropy;
  return g;
}

class PpoLearner {
 public:
  PpoLearner(std::unique_ptr<Policy> policy, Mlp value, PpoConfig cfg)
      : policy_(std::move(policy)),
        value_(std::move(value)),
        cfg_(cfg),
        policy_opt_(numcore::AdamConfig{cfg.lr}),
        value_opt_(numcore::AdamConfig{cfg.lr}) {
    cfg_.validate();
  }

  PpoLearner(const PpoLearner& o)
      : policy_(o.policy_->clone()),
        value_(o.value_),
        cfg_(o.cfg_),
        policy_opt_(o.policy_opt_),
        value_opt_(o.value_opt_) {}

  Policy& policy() { return *policy_; }
  const Policy& policy() const { return *policy_; }
  Mlp& value() { return value_; }
  const Mlp& value() const { return value_; }
  const PpoConfig& config() const { return cfg_; }
  void set_entropy_coef(double c) { cfg_.entropy_coef = c; }

  PpoStats update(const PpoBatch& batch, Rng& rng) {
    check_reward_source(batch.reward_source);
    const std::size_t n = batch.size();
    if (n == 0) throw ContractError("ppo update on an empty batch");
    if (batch.obs.rows() != n || batch.actions.rows() != n || batch.log_probs.size() != n ||
        batch.dones.size() != n) {
      throw DimensionError("ppo batch fields disagree on length " + std::to_string(n));
    }

    std::vector<double> values(n + 1, 0.0);
    {
      const Tensor v = value_.predict(batch.obs);
      std::copy(v.data().begin(), v.data().end(), values.begin());
      if (!batch.bootstrap_obs.empty()) {
        values[n] = value_.predict(Tensor::row(batch.bootstrap_obs))[0];
      }
    }
    auto est = compute_gae(batch.rewards, values, batch.dones, cfg_.gamma, cfg_.gae_lambda);
    normalize(est.advantages);

    PpoStats stats;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      double kl_sum = 0.0, pl = 0.0, vl = 0.0, ent = 0.0;
      std::size_t rows = 0;
      for (std::size_t start = 0; start < n; start += cfg_.minibatch) {
        const std::size_t m = std::min(cfg_.minibatch, n - start);
        Tensor obs = Tensor::zeros(m, batch.obs.cols());
        Tensor act = Tensor::zeros(m, batch.actions.cols());
        Tensor old = Tensor::zeros(m, 1), adv = Tensor::zeros(m, 1), ret = Tensor::zeros(m, 1);
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t k = order[start + i];
          std::copy_n(batch.obs.row_span(k).begin(), obs.cols(), obs.row_span(i).begin());
          std::copy_n(batch.actions.row_span(k).begin(), act.cols(), act.row_span(i).begin());
          old[i] = batch.log_probs[k];
          adv[i] = est.advantages[k];
          ret[i] = est.returns[k];
        }
        Tape tape;
        auto g = ppo_loss(tape, *policy_, value_, obs, act, old, adv, ret, cfg_);
        tape.backward(g.total);
        for (std::size_t i = 0; i < m; ++i) kl_sum += old[i] - g.log_prob.value()[i];
        rows += m;
        pl += g.policy_loss.value()[0] * static_cast<double>(m);
        vl += g.value_loss.value()[0] * static_cast<double>(m);
        ent += g.entropy.value()[0] * static_cast<double>(m);

        auto pg = policy_->net().gradients(tape, g.policy.trace);
        auto vg = value_.gradients(tape, g.value);
        numcore::clip_global_norm(pg, cfg_.max_grad_norm);
        numcore::clip_global_norm(vg, cfg_.max_grad_norm);
        policy_opt_.step(policy_->net(), pg);
        value_opt_.step(value_, vg);
      }
      const double denom = static_cast<double>(rows);
      stats.policy_loss = pl / denom;
      stats.value_loss = vl / denom;
      stats.entropy = ent / denom;
      stats.approx_kl = kl_sum / denom;
      stats.epochs_run = epoch + 1;
      if (stats.approx_kl > 10.0 * cfg_.target_kl) {
        stats.early_stopped = true;
        break;
      }
    }
    return stats;
  }

 private:
  std::unique_ptr<Policy> policy_;
  Mlp value_;
  PpoConfig cfg_;
  numcore::Adam policy_opt_;
  numcore::Adam value_opt_;
};

}  // namespace ciail::rl
