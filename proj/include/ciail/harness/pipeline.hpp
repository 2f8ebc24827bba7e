#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/harness/checkpoints.hpp"
#include "ciail/harness/config.hpp"
#include "ciail/harness/demos.hpp"
#include "ciail/harness/expert.hpp"
#include "ciail/harness/format.hpp"
#include "ciail/imitation/trainer.hpp"

namespace ciail::harness {

namespace fs = std::filesystem;

// total split over parts, the remainder going to the first parts.
inline std::vector<int> even_split(int total, int parts) {
  std::vector<int> out(static_cast<std::size_t>(parts), total / parts);
  for (int k = 0; k < total % parts; ++k) ++out[static_cast<std::size_t>(k)];
  return out;
}

inline void check_expert(const rl::Policy& p, const envs::EnvSpec& spec) {
  if (p.obs_dim() != kExpertObsDim) {
    throw LoadError("expert expects " + std::to_string(p.obs_dim()) + " observation entries, not " +
                    std::to_string(kExpertObsDim));
  }
  if (p.discrete() != envs::is_discrete(spec.id)) {
    throw LoadError(std::string("expert action space does not match env ") + envs::to_string(spec.id));
  }
}

// Stochastic expert rollouts, n_traj in total spread evenly over settings.
// experts[e] demonstrates setting e. gt_returns, if given, receives the
// ground-truth return of every trajectory.
inline DemoSet collect_demos(const std::vector<const rl::Policy*>& experts, envs::EnvSpec spec, int n_traj,
                             std::uint64_t seed, std::vector<double>* gt_returns = nullptr) {
  if (static_cast<int>(experts.size()) != spec.n_settings) {
    throw LoadError("need one expert per setting: got " + std::to_string(experts.size()) + " for " +
                    std::to_string(spec.n_settings) + " settings");
  }
  if (n_traj < 1) throw ConfigError("demos.trajectories must be >= 1");
  DemoSet d;
  d.header.env_id = spec.id;
  d.header.obs_dim = envs::obs_dim(spec.id);
  d.header.space = envs::action_space(spec.id);
  d.header.n_settings = spec.n_settings;
  d.header.horizon = spec.horizon;
  d.header.generator_seed = seed;

  const auto counts = even_split(n_traj, spec.n_settings);
  for (int e = 0; e < spec.n_settings; ++e) {
    check_expert(*experts[static_cast<std::size_t>(e)], spec);
    spec.setting = e;
    envs::NavEnv env(spec);
    env.set_label_source(envs::LabelSource::expert(e));
    envs::ShapedExpertReward shaped(spec);
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(e)));
    const rl::Policy& pol = *experts[static_cast<std::size_t>(e)];
    for (int k = 0; k < counts[static_cast<std::size_t>(e)]; ++k) {
      Trajectory tr{e, {}};
      envs::Obs obs = env.reset(rng);
      shaped.reset();
      double ret = 0.0;
      bool done = false;
      while (!done) {
        const envs::Action a = pol.sample(expert_obs(obs, shaped), rng).action;
        auto r = env.step(a, rng);
        shaped(env.agent(), env.goal());
        ret += r.reward_gt.for_evaluation();
        tr.steps.push_back({obs, a, r.next_obs, r.done, e, 0});
        obs = std::move(r.next_obs);
        done = r.done;
      }
      if (gt_returns) gt_returns->push_back(ret);
      d.trajectories.push_back(std::move(tr));
    }
  }
  return d;
}

// Ground-truth return of a recorded trajectory, read back from the
// (agent, goal) part of each next observation.
inline double trajectory_return(const Trajectory& tr) {
  double r = 0.0;
  for (const auto& s : tr.steps) r -= envs::distance({s.s_next[0], s.s_next[1]}, {s.s_next[2], s.s_next[3]});
  return r;
}

// Mean ground-truth return of the demonstrations.
inline double expert_reference(const DemoSet& d) {
  if (d.trajectories.empty()) throw LoadError("demo set has no trajectories");
  double s = 0.0;
  for (const auto& tr : d.trajectories) s += trajectory_return(tr);
  return s / static_cast<double>(d.trajectories.size());
}

struct References {
  double random = 0.0;  // uniform random actions
  double oracle = 0.0;  // straight to the goal
};

inline References reference_returns(envs::EnvSpec spec, int episodes, std::uint64_t seed) {
  spec.setting = 0;
  const bool discrete = envs::is_discrete(spec.id);
  Rng a(derive_seed(seed, 200)), b(derive_seed(seed, 200));
  return {evaluate_shaped(random_controller(discrete), spec, episodes, a).gt_mean,
          evaluate_shaped(oracle_controller(discrete, spec.step_size), spec, episodes, b).gt_mean};
}

// (R - lo) / (hi - lo): 0 at lo, 1 at hi.
inline double normalized(double r, double lo, double hi) { return (r - lo) / (hi - lo); }

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> c = {"round",           "disc_loss",        "penalty",
                                             "disc_accuracy",   "train_reward_mean", "eval_return_mean",
                                             "eval_return_std", "lambda",           "n_settings",
                                             "degenerate",      "stale_signal"};
  return c;
}

inline std::string metrics_csv(const std::vector<imitation::RoundMetrics>& ms) {
  std::string out;
  for (std::size_t i = 0; i < metrics_columns().size(); ++i) out += (i ? "," : "") + metrics_columns()[i];
  out += "\n";
  for (const auto& m : ms) {
    out += std::to_string(m.round) + "," + fmt(m.disc_loss) + "," + fmt(m.penalty) + "," + fmt(m.disc_accuracy) +
           "," + fmt(m.train_reward_mean) + "," + (m.eval_mean ? fmt(*m.eval_mean) : "") + "," +
           (m.eval_std ? fmt(*m.eval_std) : "") + "," + fmt(m.lambda) + "," + std::to_string(m.n_settings) + "," +
           std::to_string(m.degenerate) + "," + (m.stale_signal ? "1" : "0") + "\n";
  }
  return out;
}

// Wall-clock lives apart from metrics.csv so that file stays reproducible.
inline std::string timing_csv(const std::vector<imitation::RoundMetrics>& ms) {
  std::string out = "round,wall_ms\n";
  for (const auto& m : ms) out += std::to_string(m.round) + "," + fmt(m.wall_ms) + "\n";
  return out;
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot open '" + p.string() + "' for writing");
  os << text;
}

inline void check_demo_env(const DemoSet& d, const envs::EnvSpec& env) {
  if (d.header.env_id != env.id) {
    throw LoadError(std::string("demos were recorded on ") + envs::to_string(d.header.env_id) + ", config env is " +
                    envs::to_string(env.id));
  }
  if (d.header.obs_dim != envs::obs_dim(env.id) || !(d.header.space == envs::action_space(env.id))) {
    throw LoadError("demo header does not match env spaces");
  }
}

struct RunResult {
  std::uint64_t seed = 0;
  std::unique_ptr<imitation::ImitationTrainer> trainer;
  std::optional<double> final_mean;
  std::optional<double> final_std;
};

// One imitation run. With out_dir set, writes metrics.csv, timing.csv,
// config.txt (fully resolved) and policy.ckpt there.
inline RunResult run_imitation(const ExperimentConfig& cfg, const DemoSet& demos, std::uint64_t seed,
                               const std::string& out_dir = {}) {
  check_demo_env(demos, cfg.imitation.env);
  imitation::ImitationConfig ic = cfg.imitation;
  ic.seed = seed;
  RunResult r;
  r.seed = seed;
  r.trainer = std::make_unique<imitation::ImitationTrainer>(ic, demos.transitions());
  const auto& ms = r.trainer->train();
  for (auto it = ms.rbegin(); it != ms.rend(); ++it) {
    if (it->eval_mean) {
      r.final_mean = it->eval_mean;
      r.final_std = it->eval_std;
      break;
    }
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    ExperimentConfig resolved = cfg;
    resolved.imitation.seed = seed;
    resolved.seeds = {seed};
    write_file(fs::path(out_dir) / "metrics.csv", metrics_csv(ms));
    write_file(fs::path(out_dir) / "timing.csv", timing_csv(ms));
    save_config((fs::path(out_dir) / "config.txt").string(), resolved);
    PolicyMeta meta;
    meta.env = ic.env.id;
    meta.obs_dim = envs::obs_dim(ic.env.id);
    meta.discrete = envs::is_discrete(ic.env.id);
    save_policy((fs::path(out_dir) / "policy.ckpt").string(), r.trainer->policy(), meta);
  }
  return r;
}

struct SweepCell {
  int n_updates = 1;
  std::optional<double> lambda;  // unset: the ERM column
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<double>> finals;  // per seed; unset on failure
  std::vector<std::string> errors;            // per seed; empty on success

  std::string label() const { return lambda ? "lambda=" + fmt(*lambda) : "erm"; }
  std::vector<double> successes() const {
    std::vector<double> v;
    for (const auto& f : finals) {
      if (f) v.push_back(*f);
    }
    return v;
  }
};

struct SweepResult {
  std::vector<int> rows;             // n_updates values
  std::vector<std::string> columns;  // lambda labels, then "erm"
  std::vector<std::vector<SweepCell>> cells;
};

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  rl::EvalResult e{xs};
  rl::summarize(e);
  return {e.mean, e.std};
}

inline std::string cell_dir(const SweepCell& c) {
  return "n" + std::to_string(c.n_updates) + "_" + c.label();
}

// The lambda x n_updates grid plus an ERM column, every cell over all seeds.
// Cells run on `jobs` threads in `order` (default: grid order); a failing
// run is recorded in its cell and the sweep continues.
inline SweepResult sweep(const ExperimentConfig& cfg, const DemoSet& demos, const std::string& out_dir = {},
                         int jobs = 1, std::vector<std::size_t> order = {},
                         const std::function<void(const SweepCell&, std::size_t seed_idx)>& progress = {}) {
  cfg.validate();
  check_demo_env(demos, cfg.imitation.env);
  const disc::RegKind kind = cfg.imitation.reg.kind == disc::RegKind::erm ? disc::RegKind::irm
                                                                          : cfg.imitation.reg.kind;
  SweepResult res;
  res.rows = cfg.sweep_n_updates;
  for (double l : cfg.sweep_lambdas) res.columns.push_back("lambda=" + fmt(l));
  res.columns.push_back("erm");

  struct Task {
    std::size_t row, col, seed_idx;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    res.cells.emplace_back();
    for (std::size_t j = 0; j < res.columns.size(); ++j) {
      SweepCell c;
      c.n_updates = res.rows[i];
      if (j < cfg.sweep_lambdas.size()) c.lambda = cfg.sweep_lambdas[j];
      c.seeds = cfg.seeds;
      c.finals.resize(cfg.seeds.size());
      c.errors.resize(cfg.seeds.size());
      res.cells[i].push_back(std::move(c));
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) tasks.push_back({i, j, s});
    }
  }
  if (order.empty()) {
    order.resize(tasks.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  }
  if (order.size() != tasks.size()) throw ContractError("sweep order must list every run once");

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < order.size();) {
      const Task t = tasks[order[k]];
      SweepCell& c = res.cells[t.row][t.col];
      ExperimentConfig rc = cfg;
      rc.imitation.reg.n_updates = c.n_updates;
      rc.imitation.reg.kind = c.lambda ? kind : disc::RegKind::erm;
      rc.imitation.reg.lambda = c.lambda.value_or(0.0);
      const std::uint64_t seed = c.seeds[t.seed_idx];
      std::string dir;
      if (!out_dir.empty()) dir = (fs::path(out_dir) / cell_dir(c) / ("seed" + std::to_string(seed))).string();
      try {
        auto r = run_imitation(rc, demos, seed, dir);
        if (!r.final_mean) throw Error("run finished without an evaluation");
        c.finals[t.seed_idx] = r.final_mean;
      } catch (const std::exception& e) {
        c.errors[t.seed_idx] = e.what();
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(mu);
        progress(c, t.seed_idx);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::max(jobs, 1); ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return res;
}

// Rows: n_updates; columns: lambda values then erm. Cells: mean±std over the
// seeds that finished, or "failed".
inline std::string summary_csv(const SweepResult& r) {
  std::string out = "n_updates";
  for (const auto& c : r.columns) out += "," + c;
  out += "\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    out += std::to_string(r.rows[i]);
    for (const auto& c : r.cells[i]) {
      const auto ok = c.successes();
      if (ok.empty()) {
        out += ",failed";
      } else {
        const auto [m, s] = mean_std(ok);
        out += "," + mean_pm_std(m, s);
      }
    }
    out += "\n";
  }
  return out;
}

inline std::string failures_csv(const SweepResult& r) {
  std::string out = "cell,seed,error\n";
  for (const auto& row : r.cells) {
    for (const auto& c : row) {
      for (std::size_t s = 0; s < c.seeds.size(); ++s) {
        if (c.errors[s].empty()) continue;
        std::string msg = c.errors[s];
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out += cell_dir(c) + "," + std::to_string(c.seeds[s]) + "," + msg + "\n";
      }
    }
  }
  return out;
}

}  // namespace ciail::harness
