#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore/rng.hpp"

namespace ciail::envs {

enum class EnvId { move_point, point_mass, spur_point };

inline const char* to_string(EnvId id) {
  switch (id) {
    case EnvId::move_point: return "move_point";
    case EnvId::point_mass: return "point_mass";
    case EnvId::spur_point: return "spur_point";
  }
  return "?";
}

inline EnvId env_id_from_string(const std::string& s) {
  if (s == "move_point") return EnvId::move_point;
  if (s == "point_mass") return EnvId::point_mass;
  if (s == "spur_point") return EnvId::spur_point;
  throw ConfigError("unknown env id '" + s + "'");
}

inline constexpr int kMaxSettings = 4;

struct EnvSpec {
  EnvId id = EnvId::move_point;
  int horizon = 200;
  double step_size = 0.05;
  int setting = 0;
  int n_settings = 4;
  std::uint64_t seed = 0;
  double waypoint_radius = 0.1;
  double min_spawn_distance = 0.2;
  double spur_noise_std = 0.05;
};

inline void validate(const EnvSpec& spec) {
  if (spec.horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (!(spec.step_size > 0.0 && spec.step_size <= 0.25)) {
    throw ConfigError("env.step_size must lie in (0, 0.25]");
  }
  if (spec.n_settings < 1 || spec.n_settings > kMaxSettings) {
    throw ConfigError("env.n_settings must lie in [1, " + std::to_string(kMaxSettings) + "]");
  }
  if (spec.setting < 0 || spec.setting >= spec.n_settings) {
    throw ConfigError("setting " + std::to_string(spec.setting) + " outside configured range [0, " +
                      std::to_string(spec.n_settings) + ")");
  }
  if (!(spec.min_spawn_distance >= 0.0 && spec.min_spawn_distance < 1.0)) {
    throw ConfigError("env.min_spawn_distance must lie in [0, 1)");
  }
}

// Discrete moves for move_point / spur_point.
enum Move : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumMoves = 4;

using Vec2 = std::array<double, 2>;
using Action = std::variant<int, Vec2>;
using Obs = std::vector<double>;

struct ActionSpace {
  bool discrete = true;
  int n = kNumMoves;  // discrete: number of actions; continuous: dimension
  // Width of the action encoding fed to discriminators (one-hot or raw).
  std::size_t encoded_width() const { return static_cast<std::size_t>(n); }
  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;
};

inline bool is_discrete(EnvId id) { return id != EnvId::point_mass; }

inline ActionSpace action_space(EnvId id) {
  return is_discrete(id) ? ActionSpace{true, kNumMoves} : ActionSpace{false, 2};
}

inline std::size_t obs_dim(EnvId id) { return id == EnvId::spur_point ? 5 : 4; }

// Number of leading observation entries that are causal (agent, goal).
inline constexpr std::size_t kCausalObsDim = 4;

// Ground-truth reward. Deliberately not convertible to double: learning code
// must never consume it; evaluation reads it through for_evaluation().
class GroundTruthReward {
 public:
  GroundTruthReward() = default;
  explicit GroundTruthReward(double v) : value_(v) {}
  double for_evaluation() const { return value_; }

 private:
  double value_ = 0.0;
};

struct StepResult {
  Obs next_obs;
  GroundTruthReward reward_gt;
  bool done = false;
};

// One recorded environment step.
struct Transition {
  Obs s;
  Action a;
  Obs s_next;
  bool done = false;
  int setting_id = 0;
  int round_id = 0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

inline const std::array<Vec2, kMaxSettings>& waypoints() {
  static const std::array<Vec2, kMaxSettings> w = {
      Vec2{0.25, 0.25}, Vec2{0.25, 0.75}, Vec2{0.75, 0.25}, Vec2{0.75, 0.75}};
  return w;
}

inline double distance(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// Where the spurious channel of spur_point draws from.
struct LabelSource {
  enum class Kind { policy_rollout, expert_demo };
  Kind kind = Kind::policy_rollout;
  int setting = 0;

  static LabelSource policy() { return {Kind::policy_rollout, 0}; }
  static LabelSource expert(int e) { return {Kind::expert_demo, e}; }
};

// Centre of the spurious channel for expert setting e: evenly spaced in
// [0.2, 0.8] over the configured settings.
inline double spurious_center(int setting, int n_settings) {
  if (n_settings <= 1) return 0.5;
  return 0.2 + 0.6 * static_cast<double>(setting) / static_cast<double>(n_settings - 1);
}

inline double emit_spurious(const LabelSource& source, int n_settings, double noise_std, Rng& rng) {
  if (source.kind == LabelSource::Kind::policy_rollout) return uniform01(rng);
  if (source.setting < 0 || source.setting >= n_settings) {
    throw ConfigError("spurious source setting out of range");
  }
  const double z = spurious_center(source.setting, n_settings) + normal(rng, 0.0, noise_std);
  return std::clamp(z, 0.0, 1.0);
}

// 2D navigation in the unit square with a fixed per-episode goal.
class NavEnv {
 public:
  explicit NavEnv(EnvSpec spec) : spec_(spec) { validate(spec_); }

  const EnvSpec& spec() const { return spec_; }
  std::size_t obs_dim() const { return envs::obs_dim(spec_.id); }
  ActionSpace action_space() const { return envs::action_space(spec_.id); }

  void set_label_source(LabelSource src) { source_ = src; }
  const LabelSource& label_source() const { return source_; }

  Obs reset(Rng& rng) {
    agent_ = {uniform01(rng), uniform01(rng)};
    do {
      goal_ = {uniform01(rng), uniform01(rng)};
    } while (distance(agent_, goal_) < spec_.min_spawn_distance);
    t_ = 0;
    started_ = true;
    return observe(rng);
  }

  StepResult step(const Action& action, Rng& rng) {
    if (!started_ || t_ >= spec_.horizon) throw EpisodeFinishedError("step after episode end");
    if (is_discrete(spec_.id)) {
      const int* idx = std::get_if<int>(&action);
      if (!idx || *idx < 0 || *idx >= kNumMoves) {
        throw ContractError("discrete env requires an action index in [0, 4)");
      }
      switch (*idx) {
        case kUp: agent_[1] += spec_.step_size; break;
        case kDown: agent_[1] -= spec_.step_size; break;
        case kLeft: agent_[0] -= spec_.step_size; break;
        case kRight: agent_[0] += spec_.step_size; break;
      }
    } else {
      const Vec2* v = std::get_if<Vec2>(&action);
      if (!v) throw ContractError("point_mass requires a continuous 2-vector action");
      agent_[0] += spec_.step_size * std::clamp((*v)[0], -1.0, 1.0);
      agent_[1] += spec_.step_size * std::clamp((*v)[1], -1.0, 1.0);
    }
    agent_[0] = std::clamp(agent_[0], 0.0, 1.0);
    agent_[1] = std::clamp(agent_[1], 0.0, 1.0);
    ++t_;
    StepResult r;
    r.next_obs = observe(rng);
    r.reward_gt = GroundTruthReward(-distance(agent_, goal_));
    r.done = t_ >= spec_.horizon;
    return r;
  }

  // Test and oracle hooks.
  void place(const Vec2& agent, const Vec2& goal) {
    agent_ = agent;
    goal_ = goal;
    t_ = 0;
    started_ = true;
  }

  const Vec2& agent() const { return agent_; }
  const Vec2& goal() const { return goal_; }
  int t() const { return t_; }
  bool done() const { return started_ && t_ >= spec_.horizon; }

 private:
  Obs observe(Rng& rng) const {
    Obs o = {agent_[0], agent_[1], goal_[0], goal_[1]};
    if (spec_.id == EnvId::spur_point) {
      o.push_back(emit_spurious(source_, spec_.n_settings, spec_.spur_noise_std, rng));
    }
    return o;
  }

  EnvSpec spec_;
  LabelSource source_;
  Vec2 agent_{0.0, 0.0};
  Vec2 goal_{0.0, 0.0};
  int t_ = 0;
  bool started_ = false;
};

// Intermediate-goal expert reward: distance to waypoint w_e until the agent
// has been within the waypoint radius, distance to the goal afterwards.
class ShapedExpertReward {
 public:
  explicit ShapedExpertReward(const EnvSpec& spec) : radius_(spec.waypoint_radius) {
    validate(spec);
    waypoint_ = waypoints()[static_cast<std::size_t>(spec.setting)];
  }

  void reset() { reached_ = false; }
  bool reached() const { return reached_; }
  const Vec2& waypoint() const { return waypoint_; }

  double operator()(const Vec2& agent, const Vec2& goal) {
    if (reached_) return -distance(agent, goal);
    const double d = distance(agent, waypoint_);
    if (d <= radius_) reached_ = true;
    return -d;
  }

 private:
  Vec2 waypoint_{};
  double radius_ = 0.1;
  bool reached_ = false;
};

// Greedy move of the agent toward target: the larger axis gap for discrete
// moves, a unit-clamped direction for point_mass.
inline Action scripted_action(const Vec2& agent, const Vec2& target, bool discrete, double step) {
  const double dx = target[0] - agent[0], dy = target[1] - agent[1];
  if (!discrete) return Vec2{std::clamp(dx / step, -1.0, 1.0), std::clamp(dy / step, -1.0, 1.0)};
  if (std::abs(dx) >= std::abs(dy)) return dx >= 0 ? kRight : kLeft;
  return dy >= 0 ? kUp : kDown;
}

inline std::vector<double> causal_part(const Obs& o) {
  return std::vector<double>(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(kCausalObsDim));
}

}  // namespace ciail::envs
