#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ciail/disc/discriminator.hpp"
#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"
#include "ciail/imitation/partition.hpp"
#include "ciail/rl/policy.hpp"
#include "ciail/rl/ppo.hpp"
#include "ciail/rl/replay.hpp"
#include "ciail/rl/rollout.hpp"
#include "ciail/rl/sac.hpp"

namespace ciail::imitation {

using envs::Transition;
using numcore::Tensor;

enum class Algo { ppo, sac };

inline const char* to_string(Algo a) { return a == Algo::ppo ? "ppo" : "sac"; }
inline Algo algo_from_string(const std::string& s) {
  if (s == "ppo") return Algo::ppo;
  if (s == "sac") return Algo::sac;
  throw ConfigError("unknown algorithm '" + s + "'");
}

struct ImitationConfig {
  envs::EnvSpec env;
  Algo algo = Algo::ppo;

  disc::HeadKind head = disc::HeadKind::gail;
  disc::InputMode input_mode = disc::InputMode::sas;
  std::optional<disc::RewardMode> reward_mode;  // head default when unset
  disc::RegConfig reg;
  std::vector<std::size_t> disc_hidden = {64, 64};
  numcore::Activation disc_activation = numcore::Activation::relu;
  double disc_lr = 1e-3;

  std::vector<std::size_t> policy_hidden = {64, 64};
  numcore::Activation policy_activation = numcore::Activation::tanh;
  rl::PpoConfig ppo;
  rl::SacConfig sac;

  std::optional<PartitionMode> partition;  // expert_source for ppo, replay_round for sac
  std::size_t rollout_steps = 2048;        // on-policy batch per round
  std::size_t offpolicy_steps = 256;       // env steps appended to the replay per round
  int sac_updates_per_round = 256;
  std::size_t disc_policy_rows = 1024;     // replay rows per discriminator update
  std::size_t replay_capacity = 100000;
  int bucket_span = 5;
  int replay_settings = 4;

  int n_rounds = 300;
  int eval_every = 5;
  int eval_episodes = 10;
  int stale_rounds = 5;
  double stale_accuracy = 0.999;
  std::uint64_t seed = 0;

  disc::RewardMode resolved_reward_mode() const {
    return reward_mode.value_or(disc::default_reward_mode(head));
  }
  PartitionMode resolved_partition() const {
    return partition.value_or(algo == Algo::ppo ? PartitionMode::expert_source : PartitionMode::replay_round);
  }

  void validate() const {
    envs::validate(env);
    reg.validate();
    ppo.validate();
    sac.validate();
    if (n_rounds < 0) throw ConfigError("n_rounds must be nonnegative");
    if (rollout_steps < 1 || offpolicy_steps < 1) throw ConfigError("rollout sizes must be positive");
    if (sac_updates_per_round < 0) throw ConfigError("sac updates per round must be nonnegative");
    if (eval_every < 1 || eval_episodes < 1) throw ConfigError("evaluation cadence must be positive");
    if (bucket_span < 1 || replay_settings < 1) throw ConfigError("replay bucketing must be positive");
    if (!(disc_lr > 0.0)) throw ConfigError("disc.lr must be positive");
    if (disc_policy_rows < 2) throw ConfigError("disc policy rows must be >= 2");
  }
};

struct RoundMetrics {
  int round = 0;
  double disc_loss = 0.0;
  double penalty = 0.0;
  double disc_accuracy = 0.0;
  double train_reward_mean = 0.0;
  std::optional<double> eval_mean;
  std::optional<double> eval_std;
  double lambda = 0.0;
  int n_settings = 0;
  int degenerate = 0;  // single-setting fallbacks and re-drawn partitions this round
  bool stale_signal = false;
  double wall_ms = 0.0;  // not part of the deterministic metrics stream
};

struct PartitionEvent {
  int round = 0;
  const Partition* partition = nullptr;
  const std::vector<Transition>* expert = nullptr;
  const std::vector<Transition>* policy = nullptr;
};

// Observation-space and action-space checks between demos and env.
inline void check_demos(const std::vector<Transition>& demos, const envs::EnvSpec& env) {
  if (demos.empty()) throw LoadError("no demonstration transitions");
  const std::size_t d = envs::obs_dim(env.id);
  const bool discrete = envs::is_discrete(env.id);
  for (const auto& t : demos) {
    if (t.s.size() != d || t.s_next.size() != d) {
      throw LoadError("demo observation width " + std::to_string(t.s.size()) + " does not match env " +
                      envs::to_string(env.id) + " (" + std::to_string(d) + ")");
    }
    if (std::holds_alternative<int>(t.a) != discrete) {
      throw LoadError(std::string("demo action type does not match env ") + envs::to_string(env.id));
    }
  }
}

// Alternates discriminator and policy-optimizer phases on the
// (expert, policy) data tuple with settings drawn from a Partition.
class ImitationTrainer {
 public:
  ImitationTrainer(ImitationConfig cfg, std::vector<Transition> demos)
      : cfg_(std::move(cfg)),
        demos_(std::move(demos)),
        rng_(cfg_.seed),
        collector_(cfg_.env, envs::LabelSource::policy()),
        replay_(cfg_.replay_capacity) {
    cfg_.validate();
    check_demos(demos_, cfg_.env);
    for (std::size_t i = 0; i < demos_.size(); ++i) by_source_[demos_[i].setting_id].push_back(i);

    Rng init(derive_seed(cfg_.seed, 1));
    const std::size_t obs = envs::obs_dim(cfg_.env.id);
    const auto space = envs::action_space(cfg_.env.id);
    auto policy = rl::make_policy(obs, space, cfg_.policy_hidden, cfg_.policy_activation, init);
    if (cfg_.algo == Algo::ppo) {
      ppo_.emplace(std::move(policy), rl::make_value_net(obs, cfg_.policy_hidden, cfg_.policy_activation, init),
                   cfg_.ppo);
    } else {
      std::array<numcore::Mlp, 2> q = {
          rl::make_q_net(obs, space, cfg_.policy_hidden, cfg_.policy_activation, init),
          rl::make_q_net(obs, space, cfg_.policy_hidden, cfg_.policy_activation, init)};
      sac_.emplace(std::move(policy), std::move(q), cfg_.sac);
    }
    disc::DiscSpec ds;
    ds.head = cfg_.head;
    ds.mode = cfg_.input_mode;
    ds.hidden = cfg_.disc_hidden;
    ds.activation = cfg_.disc_activation;
    ds.gamma = cfg_.algo == Algo::ppo ? cfg_.ppo.gamma : cfg_.sac.gamma;
    ds.obs_dim = obs;
    ds.space = space;
    disc_.emplace(ds, init);
    disc_opt_ = disc::DiscOptimizer(*disc_, numcore::AdamConfig{cfg_.disc_lr});
  }

  const ImitationConfig& config() const { return cfg_; }
  int round() const { return round_; }
  const rl::Policy& policy() const { return ppo_ ? ppo_->policy() : sac_->policy(); }
  const disc::Discriminator& discriminator() const { return *disc_; }
  const std::vector<RoundMetrics>& metrics() const { return metrics_; }
  const rl::ReplayBuffer& replay() const { return replay_; }
  std::size_t n_sources() const { return by_source_.size(); }

  void set_partition_observer(std::function<void(const PartitionEvent&)> f) { observer_ = std::move(f); }

  // Ground-truth evaluation with a dedicated rng stream per call site.
  rl::EvalResult evaluate(int episodes, std::uint64_t stream) const {
    Rng rng(derive_seed(cfg_.seed, stream));
    envs::EnvSpec spec = cfg_.env;
    return rl::evaluate_policy(policy(), spec, episodes, true, rng);
  }

  RoundMetrics run_round() {
    const auto t0 = std::chrono::steady_clock::now();
    RoundMetrics m;
    m.round = round_;
    m.lambda = cfg_.reg.effective_lambda(round_);
    if (cfg_.algo == Algo::ppo) on_policy_round(m);
    else off_policy_round(m);

    streak_ = m.disc_accuracy >= cfg_.stale_accuracy ? streak_ + 1 : 0;
    m.stale_signal = streak_ >= cfg_.stale_rounds;
    const bool last = round_ + 1 == cfg_.n_rounds;
    if ((round_ + 1) % cfg_.eval_every == 0 || last) {
      const auto ev = evaluate(cfg_.eval_episodes, 1000 + static_cast<std::uint64_t>(round_));
      m.eval_mean = ev.mean;
      m.eval_std = ev.std;
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    metrics_.push_back(m);
    ++round_;
    return m;
  }

  const std::vector<RoundMetrics>& train() {
    while (round_ < cfg_.n_rounds) run_round();
    return metrics_;
  }

 private:
  // Observation and action tensors of a transition list.
  std::pair<Tensor, Tensor> obs_actions(const std::vector<Transition>& rows) const {
    const rl::Policy& pol = policy();
    Tensor obs = Tensor::zeros(rows.size(), pol.obs_dim());
    Tensor act = Tensor::zeros(rows.size(), pol.action_width());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(rows[i].s.begin(), rows[i].s.end(), obs.row_span(i).begin());
      const auto a = rl::action_row(rows[i].a);
      std::copy(a.begin(), a.end(), act.row_span(i).begin());
    }
    return {obs, act};
  }

  disc::DiscBatch disc_rows(const std::vector<Transition>& rows) const {
    disc::DiscBatch b = disc::encode(rows, disc_->spec().space);
    if (disc_->is_airl()) {
      auto [obs, act] = obs_actions(rows);
      b.log_pi = policy().log_probs(obs, act);
    }
    return b;
  }

  std::vector<Transition> sample_expert(const std::vector<std::size_t>& per_source_counts) {
    std::vector<Transition> out;
    std::size_t k = 0;
    for (const auto& [source, idx] : by_source_) {
      for (std::size_t j = 0; j < per_source_counts[k]; ++j) {
        out.push_back(demos_[idx[uniform_index(rng_, idx.size())]]);
      }
      ++k;
    }
    return out;
  }

  std::vector<Transition> sample_expert_pooled(std::size_t n) {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) out.push_back(demos_[uniform_index(rng_, demos_.size())]);
    return out;
  }

  // Builds setting batches (re-drawing on a degenerate partition) and runs
  // the discriminator phase.
  void discriminator_phase(const std::vector<Transition>& expert, const std::vector<Transition>& pol,
                           RoundMetrics& m) {
    const PartitionMode mode = cfg_.resolved_partition();
    std::optional<Partition> part;
    for (int attempt = 0; attempt < 3 && !part; ++attempt) {
      try {
        part = partition_settings(expert, pol, mode, cfg_.bucket_span, rng_);
      } catch (const DegenerateSettingError&) {
        ++m.degenerate;
      }
    }
    if (!part) throw DegenerateSettingError("partition stayed degenerate after re-draws");
    if (part->single_setting_fallback) ++m.degenerate;
    if (observer_) observer_({round_, &*part, &expert, &pol});

    const disc::DiscBatch e_all = disc_rows(expert), p_all = disc_rows(pol);
    std::vector<disc::SettingBatch> batches;
    for (std::size_t k = 0; k < part->n_settings(); ++k) {
      const auto& ie = part->expert[k];
      const auto& ip = part->policy[k];
      disc::SettingBatch sb;
      sb.setting = static_cast<int>(k);
      sb.rows = disc::concat(disc::take(e_all, ie), disc::take(p_all, ip));
      sb.labels = Tensor::zeros(ie.size() + ip.size(), 1);
      for (std::size_t i = 0; i < ie.size(); ++i) sb.labels[i] = 1.0;
      batches.push_back(std::move(sb));
    }
    auto res = disc::disc_update(*disc_, batches, cfg_.reg, m.lambda, disc_opt_, rng_);
    m.disc_loss = res.loss;
    m.penalty = res.penalty;
    m.disc_accuracy = res.accuracy;
    m.n_settings = static_cast<int>(part->n_settings());
  }

  void on_policy_round(RoundMetrics& m) {
    rl::RolloutBatch batch = collector_.collect(ppo_->policy(), cfg_.rollout_steps, round_, rng_);
    std::vector<std::size_t> counts;
    if (cfg_.resolved_partition() == PartitionMode::expert_source) {
      counts = detail::even_shares(batch.size(), by_source_.size());
    }
    const auto expert = counts.empty() ? sample_expert_pooled(batch.size()) : sample_expert(counts);
    discriminator_phase(expert, batch.steps, m);

    disc::DiscBatch rows = disc::encode(batch.steps, disc_->spec().space);
    if (disc_->is_airl()) rows.log_pi = Tensor::column(batch.log_probs);
    const auto rewards = disc::rewards_from_disc(*disc_, rows, cfg_.resolved_reward_mode());
    double s = 0.0;
    for (double r : rewards) s += r;
    m.train_reward_mean = s / static_cast<double>(rewards.size());

    rl::PpoBatch pb;
    pb.obs = std::move(batch.obs);
    pb.actions = std::move(batch.actions);
    pb.log_probs = std::move(batch.log_probs);
    pb.rewards = rewards;
    pb.dones = std::move(batch.dones);
    pb.bootstrap_obs = std::move(batch.bootstrap_obs);
    pb.reward_source = rl::RewardSource::discriminator;
    ppo_->update(pb, rng_);
  }

  void off_policy_round(RoundMetrics& m) {
    rl::RolloutBatch batch = collector_.collect(sac_->policy(), cfg_.offpolicy_steps, round_, rng_);
    for (auto& t : batch.steps) replay_.push(std::move(t));

    // Policy rows: equal draws from each round bucket in the recent window.
    const int last_bucket = round_bucket(replay_.max_round(), cfg_.bucket_span);
    const int first_bucket = std::max(round_bucket(replay_.min_round(), cfg_.bucket_span),
                                      last_bucket - cfg_.replay_settings + 1);
    std::vector<int> buckets;
    for (int b = first_bucket; b <= last_bucket; ++b) {
      if (replay_.count({b * cfg_.bucket_span, (b + 1) * cfg_.bucket_span - 1}) > 0) buckets.push_back(b);
    }
    const auto shares = detail::even_shares(cfg_.disc_policy_rows, buckets.size());
    std::vector<Transition> pol;
    for (std::size_t k = 0; k < buckets.size(); ++k) {
      const int b = buckets[k];
      auto rows = replay_.sample(shares[k], rng_, {b * cfg_.bucket_span, (b + 1) * cfg_.bucket_span - 1});
      pol.insert(pol.end(), rows.begin(), rows.end());
    }
    std::vector<Transition> expert;
    if (cfg_.resolved_partition() == PartitionMode::expert_source) {
      expert = sample_expert(detail::even_shares(pol.size(), by_source_.size()));
    } else {
      expert = sample_expert_pooled(pol.size());
    }
    discriminator_phase(expert, pol, m);

    double reward_sum = 0.0;
    std::size_t reward_rows = 0;
    const auto mode = cfg_.resolved_reward_mode();
    for (int step = 0; step < cfg_.sac_updates_per_round; ++step) {
      if (replay_.size() < cfg_.sac.batch) break;  // not ready
      const auto rows = replay_.sample(cfg_.sac.batch, rng_);
      const auto rewards = disc::rewards_from_disc(*disc_, disc_rows(rows), mode);
      rl::SacBatch sb;
      auto [obs, act] = obs_actions(rows);
      sb.obs = std::move(obs);
      sb.actions = std::move(act);
      sb.rewards = Tensor::column(rewards);
      sb.next_obs = Tensor::zeros(rows.size(), sb.obs.cols());
      sb.dones = Tensor::zeros(rows.size(), 1);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].s_next.begin(), rows[i].s_next.end(), sb.next_obs.row_span(i).begin());
        sb.dones[i] = rows[i].done ? 1.0 : 0.0;
        reward_sum += rewards[i];
      }
      reward_rows += rows.size();
      sb.reward_source = rl::RewardSource::discriminator;
      sac_->update(sb, rng_);
    }
    m.train_reward_mean = reward_rows ? reward_sum / static_cast<double>(reward_rows) : 0.0;
  }

  ImitationConfig cfg_;
  std::vector<Transition> demos_;
  std::map<int, std::vector<std::size_t>> by_source_;
  Rng rng_;
  rl::RolloutCollector collector_;
  rl::ReplayBuffer replay_;
  std::optional<rl::PpoLearner> ppo_;
  std::optional<rl::SacLearner> sac_;
  std::optional<disc::Discriminator> disc_;
  disc::DiscOptimizer disc_opt_;
  std::function<void(const PartitionEvent&)> observer_;
  std::vector<RoundMetrics> metrics_;
  int round_ = 0;
  int streak_ = 0;
};

}  // namespace ciail::imitation
