#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/harness/expert.hpp"
#include "ciail/harness/format.hpp"
#include "ciail/imitation/trainer.hpp"

// Experiment configuration: a flat "key = value" text file with dotted
// section prefixes. '#' starts a comment. Every key has a default; unknown
// keys are errors. Lists are comma separated.

namespace ciail::harness {

struct ExperimentConfig {
  imitation::ImitationConfig imitation;  // imitation.seed is set per run from seeds
  ExpertConfig expert;
  int demo_trajectories = 10;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<double> sweep_lambdas = {0.01, 0.1, 1.0, 10.0};
  std::vector<int> sweep_n_updates = {1, 2, 5, 10};

  void validate() const {
    imitation.validate();
    expert.validate();
    if (demo_trajectories < 1) throw ConfigError("demos.trajectories must be >= 1");
    if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
    if (sweep_lambdas.empty() || sweep_n_updates.empty()) throw ConfigError("sweep grid must be nonempty");
    for (double l : sweep_lambdas) {
      if (!(l >= 0.0)) throw ConfigError("sweep.lambdas must be nonnegative");
    }
    for (int n : sweep_n_updates) {
      if (n < 1) throw ConfigError("sweep.n_updates must be >= 1");
    }
  }
};

namespace detail {

struct Field {
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename T>
T parse_as(const std::string& key, const std::string& v) {
  T out{};
  if constexpr (std::is_same_v<T, bool>) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  } else {
    if (!parse_number(v, out)) throw ConfigError(key + ": cannot parse '" + v + "'");
    return out;
  }
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_floating_point_v<T>) return fmt(v);
  else return std::to_string(v);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(parse_as<T>(key, item));
  return out;
}

template <typename T>
std::string show_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + show(v[i]);
  return s;
}

inline numcore::Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return numcore::Activation::tanh;
  if (s == "relu") return numcore::Activation::relu;
  if (s == "identity") return numcore::Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

// Scalar member reachable through an accessor.
template <typename T, typename Acc>
Field scalar(const std::string& key, Acc acc) {
  return {[acc](const ExperimentConfig& c) { return show(acc(const_cast<ExperimentConfig&>(c))); },
          [acc, key](ExperimentConfig& c, const std::string& v) { acc(c) = parse_as<T>(key, v); }};
}

template <typename T, typename Acc>
Field list(const std::string& key, Acc acc) {
  return {[acc](const ExperimentConfig& c) { return show_list(acc(const_cast<ExperimentConfig&>(c))); },
          [acc, key](ExperimentConfig& c, const std::string& v) { acc(c) = parse_list<T>(key, v); }};
}

template <typename Acc, typename ToS, typename FromS>
Field named(Acc acc, ToS to_s, FromS from_s) {
  return {[acc, to_s](const ExperimentConfig& c) { return std::string(to_s(acc(const_cast<ExperimentConfig&>(c)))); },
          [acc, from_s](ExperimentConfig& c, const std::string& v) { acc(c) = from_s(v); }};
}

#define CIAIL_ACC(expr) [](ExperimentConfig & c) -> auto& { return c.expr; }

inline const std::map<std::string, Field>& fields() {
  using namespace imitation;
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    m["env.id"] = named(CIAIL_ACC(imitation.env.id), [](envs::EnvId i) { return envs::to_string(i); },
                        envs::env_id_from_string);
    m["env.horizon"] = scalar<int>("env.horizon", CIAIL_ACC(imitation.env.horizon));
    m["env.step_size"] = scalar<double>("env.step_size", CIAIL_ACC(imitation.env.step_size));
    m["env.n_settings"] = scalar<int>("env.n_settings", CIAIL_ACC(imitation.env.n_settings));
    m["env.waypoint_radius"] = scalar<double>("env.waypoint_radius", CIAIL_ACC(imitation.env.waypoint_radius));
    m["env.min_spawn_distance"] =
        scalar<double>("env.min_spawn_distance", CIAIL_ACC(imitation.env.min_spawn_distance));
    m["env.spur_noise_std"] = scalar<double>("env.spur_noise_std", CIAIL_ACC(imitation.env.spur_noise_std));

    m["algo"] = named(CIAIL_ACC(imitation.algo), [](Algo a) { return to_string(a); }, algo_from_string);
    m["disc.head"] = named(CIAIL_ACC(imitation.head), [](disc::HeadKind k) { return disc::to_string(k); },
                           disc::head_from_string);
    m["disc.input_mode"] = named(CIAIL_ACC(imitation.input_mode),
                                 [](disc::InputMode k) { return disc::to_string(k); }, disc::input_mode_from_string);
    m["disc.reward_mode"] = named(
        CIAIL_ACC(imitation.reward_mode),
        [](const std::optional<disc::RewardMode>& r) { return r ? disc::to_string(*r) : "default"; },
        [](const std::string& s) -> std::optional<disc::RewardMode> {
          if (s == "default") return std::nullopt;
          return disc::reward_mode_from_string(s);
        });
    m["disc.reg.kind"] = named(CIAIL_ACC(imitation.reg.kind), [](disc::RegKind k) { return disc::to_string(k); },
                               disc::reg_from_string);
    m["disc.reg.lambda"] = scalar<double>("disc.reg.lambda", CIAIL_ACC(imitation.reg.lambda));
    m["disc.reg.warmup_rounds"] = scalar<int>("disc.reg.warmup_rounds", CIAIL_ACC(imitation.reg.warmup_rounds));
    m["disc.n_updates"] = scalar<int>("disc.n_updates", CIAIL_ACC(imitation.reg.n_updates));
    m["disc.hidden"] = list<std::size_t>("disc.hidden", CIAIL_ACC(imitation.disc_hidden));
    m["disc.activation"] = named(CIAIL_ACC(imitation.disc_activation),
                                 [](numcore::Activation a) { return numcore::to_string(a); }, activation_from_string);
    m["disc.lr"] = scalar<double>("disc.lr", CIAIL_ACC(imitation.disc_lr));

    m["policy.hidden"] = list<std::size_t>("policy.hidden", CIAIL_ACC(imitation.policy_hidden));
    m["policy.activation"] = named(CIAIL_ACC(imitation.policy_activation),
                                   [](numcore::Activation a) { return numcore::to_string(a); },
                                   activation_from_string);

    m["ppo.clip"] = scalar<double>("ppo.clip", CIAIL_ACC(imitation.ppo.clip));
    m["ppo.gamma"] = scalar<double>("ppo.gamma", CIAIL_ACC(imitation.ppo.gamma));
    m["ppo.gae_lambda"] = scalar<double>("ppo.gae_lambda", CIAIL_ACC(imitation.ppo.gae_lambda));
    m["ppo.epochs"] = scalar<int>("ppo.epochs", CIAIL_ACC(imitation.ppo.epochs));
    m["ppo.minibatch"] = scalar<std::size_t>("ppo.minibatch", CIAIL_ACC(imitation.ppo.minibatch));
    m["ppo.value_coef"] = scalar<double>("ppo.value_coef", CIAIL_ACC(imitation.ppo.value_coef));
    m["ppo.entropy_coef"] = scalar<double>("ppo.entropy_coef", CIAIL_ACC(imitation.ppo.entropy_coef));
    m["ppo.lr"] = scalar<double>("ppo.lr", CIAIL_ACC(imitation.ppo.lr));
    m["ppo.max_grad_norm"] = scalar<double>("ppo.max_grad_norm", CIAIL_ACC(imitation.ppo.max_grad_norm));
    m["ppo.target_kl"] = scalar<double>("ppo.target_kl", CIAIL_ACC(imitation.ppo.target_kl));

    m["sac.gamma"] = scalar<double>("sac.gamma", CIAIL_ACC(imitation.sac.gamma));
    m["sac.alpha"] = scalar<double>("sac.alpha", CIAIL_ACC(imitation.sac.alpha));
    m["sac.tau"] = scalar<double>("sac.tau", CIAIL_ACC(imitation.sac.tau));
    m["sac.batch"] = scalar<std::size_t>("sac.batch", CIAIL_ACC(imitation.sac.batch));
    m["sac.target_period"] = scalar<int>("sac.target_period", CIAIL_ACC(imitation.sac.target_period));
    m["sac.lr"] = scalar<double>("sac.lr", CIAIL_ACC(imitation.sac.lr));
    m["sac.max_grad_norm"] = scalar<double>("sac.max_grad_norm", CIAIL_ACC(imitation.sac.max_grad_norm));
    m["sac.updates_per_round"] = scalar<int>("sac.updates_per_round", CIAIL_ACC(imitation.sac_updates_per_round));

    m["train.rounds"] = scalar<int>("train.rounds", CIAIL_ACC(imitation.n_rounds));
    m["train.rollout_steps"] = scalar<std::size_t>("train.rollout_steps", CIAIL_ACC(imitation.rollout_steps));
    m["train.offpolicy_steps"] = scalar<std::size_t>("train.offpolicy_steps", CIAIL_ACC(imitation.offpolicy_steps));
    m["train.disc_policy_rows"] =
        scalar<std::size_t>("train.disc_policy_rows", CIAIL_ACC(imitation.disc_policy_rows));
    m["train.partition"] = named(
        CIAIL_ACC(imitation.partition),
        [](const std::optional<imitation::PartitionMode>& p) { return p ? to_string(*p) : "default"; },
        [](const std::string& s) -> std::optional<imitation::PartitionMode> {
          if (s == "default") return std::nullopt;
          return partition_mode_from_string(s);
        });
    m["train.eval_every"] = scalar<int>("train.eval_every", CIAIL_ACC(imitation.eval_every));
    m["train.eval_episodes"] = scalar<int>("train.eval_episodes", CIAIL_ACC(imitation.eval_episodes));
    m["train.stale_rounds"] = scalar<int>("train.stale_rounds", CIAIL_ACC(imitation.stale_rounds));
    m["train.stale_accuracy"] = scalar<double>("train.stale_accuracy", CIAIL_ACC(imitation.stale_accuracy));

    m["replay.capacity"] = scalar<std::size_t>("replay.capacity", CIAIL_ACC(imitation.replay_capacity));
    m["replay.bucket_span"] = scalar<int>("replay.bucket_span", CIAIL_ACC(imitation.bucket_span));
    m["replay.settings"] = scalar<int>("replay.settings", CIAIL_ACC(imitation.replay_settings));

    m["expert.budget_rounds"] = scalar<int>("expert.budget_rounds", CIAIL_ACC(expert.budget_rounds));
    m["expert.rollout_steps"] = scalar<std::size_t>("expert.rollout_steps", CIAIL_ACC(expert.rollout_steps));
    m["expert.eval_every"] = scalar<int>("expert.eval_every", CIAIL_ACC(expert.eval_every));
    m["expert.eval_episodes"] = scalar<int>("expert.eval_episodes", CIAIL_ACC(expert.eval_episodes));
    m["expert.patience"] = scalar<int>("expert.patience", CIAIL_ACC(expert.patience));
    m["expert.min_rounds"] = scalar<int>("expert.min_rounds", CIAIL_ACC(expert.min_rounds));
    m["expert.min_improvement"] = scalar<double>("expert.min_improvement", CIAIL_ACC(expert.min_improvement));
    m["expert.reward_scale"] = scalar<double>("expert.reward_scale", CIAIL_ACC(expert.reward_scale));
    m["expert.hidden"] = list<std::size_t>("expert.hidden", CIAIL_ACC(expert.hidden));
    m["expert.activation"] = named(CIAIL_ACC(expert.activation),
                                   [](numcore::Activation a) { return numcore::to_string(a); },
                                   activation_from_string);
    m["expert.ppo.clip"] = scalar<double>("expert.ppo.clip", CIAIL_ACC(expert.ppo.clip));
    m["expert.ppo.gamma"] = scalar<double>("expert.ppo.gamma", CIAIL_ACC(expert.ppo.gamma));
    m["expert.ppo.gae_lambda"] = scalar<double>("expert.ppo.gae_lambda", CIAIL_ACC(expert.ppo.gae_lambda));
    m["expert.ppo.epochs"] = scalar<int>("expert.ppo.epochs", CIAIL_ACC(expert.ppo.epochs));
    m["expert.ppo.minibatch"] = scalar<std::size_t>("expert.ppo.minibatch", CIAIL_ACC(expert.ppo.minibatch));
    m["expert.ppo.value_coef"] = scalar<double>("expert.ppo.value_coef", CIAIL_ACC(expert.ppo.value_coef));
    m["expert.ppo.entropy_coef"] = scalar<double>("expert.ppo.entropy_coef", CIAIL_ACC(expert.ppo.entropy_coef));
    m["expert.ppo.lr"] = scalar<double>("expert.ppo.lr", CIAIL_ACC(expert.ppo.lr));
    m["expert.ppo.max_grad_norm"] = scalar<double>("expert.ppo.max_grad_norm", CIAIL_ACC(expert.ppo.max_grad_norm));
    m["expert.ppo.target_kl"] = scalar<double>("expert.ppo.target_kl", CIAIL_ACC(expert.ppo.target_kl));

    m["demos.trajectories"] = scalar<int>("demos.trajectories", CIAIL_ACC(demo_trajectories));
    m["seeds"] = list<std::uint64_t>("seeds", CIAIL_ACC(seeds));
    m["sweep.lambdas"] = list<double>("sweep.lambdas", CIAIL_ACC(sweep_lambdas));
    m["sweep.n_updates"] = list<int>("sweep.n_updates", CIAIL_ACC(sweep_n_updates));
    return m;
  }();
  return f;
}

#undef CIAIL_ACC

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [key, _] : detail::fields()) k.push_back(key);
  return k;
}

inline std::string get_value(const ExperimentConfig& c, const std::string& key) {
  auto it = detail::fields().find(key);
  if (it == detail::fields().end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second.get(c);
}

inline void set_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto it = detail::fields().find(key);
  if (it == detail::fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(c, value);
}

// Applies "key = value" lines on top of base. Errors carry the line number.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    }
    try {
      set_value(base, key, trim(s.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Every key in sorted order; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& [key, f] : detail::fields()) out += key + " = " + f.get(c) + "\n";
  return out;
}

inline void save_config(const std::string& path, const ExperimentConfig& c) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os << to_text(c);
}

}  // namespace ciail::harness
