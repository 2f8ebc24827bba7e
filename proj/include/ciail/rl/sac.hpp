#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore.hpp"
#include "ciail/rl/policy.hpp"
#include "ciail/rl/ppo.hpp"

namespace ciail::rl {

struct SacConfig {
  double gamma = 0.99;
  double alpha = 0.05;
  double tau = 0.005;
  std::size_t batch = 256;
  int target_period = 1;
  double lr = 3e-4;
  double max_grad_norm = 10.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("sac.gamma must lie in (0, 1]");
    if (!(alpha >= 0.0)) throw ConfigError("sac.alpha must be nonnegative");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must lie in (0, 1]");
    if (batch < 1) throw ConfigError("sac.batch must be >= 1");
    if (target_period < 1) throw ConfigError("sac.target_period must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("sac.lr must be positive");
  }
};

// Column tensors: rewards and dones are n x 1.
struct SacBatch {
  Tensor obs;
  Tensor actions;
  Tensor rewards;
  Tensor next_obs;
  Tensor dones;
  RewardSource reward_source = RewardSource::unset;

  std::size_t size() const { return obs.rows(); }
};

struct SacStats {
  double q_loss = 0.0;
  double policy_loss = 0.0;
  bool skipped = false;  // buffer not ready
};

inline Mlp make_q_net(std::size_t obs_dim, const envs::ActionSpace& space,
                      const std::vector<std::size_t>& hidden, numcore::Activation act, Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(space.discrete ? obs_dim : obs_dim + static_cast<std::size_t>(space.n));
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(space.discrete ? static_cast<std::size_t>(space.n) : 1);
  spec.hidden = act;
  return Mlp(spec, rng);
}

// Twin-Q soft actor-critic with a fixed temperature. Discrete action sets use
// the exact expectation over actions; continuous ones the reparameterized
// single-sample form.
class SacLearner {
 public:
  SacLearner(std::unique_ptr<Policy> policy, std::array<Mlp, 2> q, SacConfig cfg)
      : policy_(std::move(policy)), q_(std::move(q)), target_(q_), cfg_(cfg) {
    cfg_.validate();
    for (auto& o : q_opt_) o = numcore::Adam(numcore::AdamConfig{cfg_.lr});
    policy_opt_ = numcore::Adam(numcore::AdamConfig{cfg_.lr});
  }

  SacLearner(const SacLearner& o)
      : policy_(o.policy_->clone()),
        q_(o.q_),
        target_(o.target_),
        cfg_(o.cfg_),
        q_opt_(o.q_opt_),
        policy_opt_(o.policy_opt_),
        updates_(o.updates_) {}

  Policy& policy() { return *policy_; }
  const Policy& policy() const { return *policy_; }
  Mlp& q(int j) { return q_.at(static_cast<std::size_t>(j)); }
  const Mlp& q(int j) const { return q_.at(static_cast<std::size_t>(j)); }
  const Mlp& target(int j) const { return target_.at(static_cast<std::size_t>(j)); }
  const SacConfig& config() const { return cfg_; }
  std::uint64_t updates() const { return updates_; }

  // Soft Bellman targets y for a batch (no gradients).
  Tensor targets(const SacBatch& b, Rng& rng) const {
    const std::size_t n = b.size();
    Tensor y = Tensor::zeros(n, 1);
    Tensor soft_v = Tensor::zeros(n, 1);
    if (policy_->discrete()) {
      const auto& pol = static_cast<const CategoricalPolicy&>(*policy_);
      const Tensor lp = numcore::detail::log_softmax_rows(pol.logits(b.next_obs));
      const Tensor q1 = target_[0].predict(b.next_obs), q2 = target_[1].predict(b.next_obs);
      for (std::size_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t a = 0; a < lp.cols(); ++a) {
          v += std::exp(lp(i, a)) * (std::min(q1(i, a), q2(i, a)) - cfg_.alpha * lp(i, a));
        }
        soft_v[i] = v;
      }
    } else {
      const auto& pol = static_cast<const GaussianPolicy&>(*policy_);
      Tape tape;
      auto r = pol.rsample(tape, b.next_obs, standard_normal(n, pol.action_width(), rng));
      const Tensor x = concat(b.next_obs, r.action.value());
      const Tensor q1 = target_[0].predict(x), q2 = target_[1].predict(x);
      for (std::size_t i = 0; i < n; ++i) {
        soft_v[i] = std::min(q1[i], q2[i]) - cfg_.alpha * r.log_prob.value()[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = b.rewards[i] + cfg_.gamma * (1.0 - b.dones[i]) * soft_v[i];
    }
    return y;
  }

  SacStats update(const SacBatch& b, Rng& rng) {
    check_reward_source(b.reward_source);
    SacStats stats;
    if (b.size() == 0) {
      stats.skipped = true;
      return stats;
    }
    const Tensor y = targets(b, rng);
    stats.q_loss = update_critics(b, y);
    stats.policy_loss = policy_->discrete() ? update_discrete_actor(b) : update_continuous_actor(b, rng);
    if (++updates_ % static_cast<std::uint64_t>(cfg_.target_period) == 0) {
      for (std::size_t j = 0; j < 2; ++j) target_[j].polyak_from(q_[j], cfg_.tau);
    }
    return stats;
  }

 private:
  static Tensor standard_normal(std::size_t n, std::size_t d, Rng& rng) {
    Tensor t = Tensor::zeros(n, d);
    for (double& v : t.data()) v = normal(rng, 0.0, 1.0);
    return t;
  }

  static Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::zeros(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
  }

  double update_critics(const SacBatch& b, const Tensor& y) {
    double total = 0.0;
    const bool discrete = policy_->discrete();
    std::vector<std::size_t> idx;
    if (discrete) {
      idx.resize(b.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::size_t>(b.actions(i, 0));
    }
    const Tensor x = discrete ? b.obs : concat(b.obs, b.actions);
    for (std::size_t j = 0; j < 2; ++j) {
      Tape tape;
      auto tr = q_[j].trace(tape, tape.constant(x));
      Var qa = discrete ? numcore::gather(tr.output, idx) : tr.output;
      Var loss = numcore::mean(numcore::square(qa - tape.constant(y)));
      tape.backward(loss);
      auto g = q_[j].gradients(tape, tr);
      numcore::clip_global_norm(g, cfg_.max_grad_norm);
      q_opt_[j].step(q_[j], g);
      total += loss.value()[0];
    }
    return total;
  }

  double update_discrete_actor(const SacBatch& b) {
    const auto& pol = static_cast<const CategoricalPolicy&>(*policy_);
    const Tensor q1 = q_[0].predict(b.obs), q2 = q_[1].predict(b.obs);
    Tensor qmin(q1.shape());
    for (std::size_t i = 0; i < q1.size(); ++i) qmin[i] = std::min(q1[i], q2[i]);
    Tape tape;
    auto [lp, tr] = pol.log_softmax_graph(tape, b.obs);
    Var per_row = numcore::row_sum(numcore::exp(lp) * (cfg_.alpha * lp - tape.constant(qmin)));
    Var loss = numcore::mean(per_row);
    tape.backward(loss);
    auto g = policy_->net().gradients(tape, tr);
    numcore::clip_global_norm(g, cfg_.max_grad_norm);
    policy_opt_.step(policy_->net(), g);
    return loss.value()[0];
  }

  double update_continuous_actor(const SacBatch& b, Rng& rng) {
    const auto& pol = static_cast<const GaussianPolicy&>(*policy_);
    Tape tape;
    auto r = pol.rsample(tape, b.obs, standard_normal(b.size(), pol.action_width(), rng));
    Var x = numcore::concat_cols({tape.constant(b.obs), r.action});
    auto t1 = q_[0].trace(tape, x);
    auto t2 = q_[1].trace(tape, x);
    Var loss = numcore::mean(cfg_.alpha * r.log_prob - numcore::minimum(t1.output, t2.output));
    tape.backward(loss);
    auto g = policy_->net().gradients(tape, r.trace);
    numcore::clip_global_norm(g, cfg_.max_grad_norm);
    policy_opt_.step(policy_->net(), g);
    return loss.value()[0];
  }

  std::unique_ptr<Policy> policy_;
  std::array<Mlp, 2> q_;
  std::array<Mlp, 2> target_;
  SacConfig cfg_;
  std::array<numcore::Adam, 2> q_opt_;
  numcore::Adam policy_opt_;
  std::uint64_t updates_ = 0;
};

}  // namespace ciail::rl
