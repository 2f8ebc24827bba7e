// ciail command-line driver.
//
//   ciail train-expert  --env move_point --out experts/
//   ciail collect-demos --out experts/              (reads experts/expert_<e>.ckpt)
//   ciail imitate       --demos experts/demos.jsonl --out runs/gail
//   ciail sweep         --demos experts/demos.jsonl --out runs/sweep --jobs 4
//   ciail evaluate      --checkpoint runs/gail/seed0/policy.ckpt
//   ciail report        runs/sweep/summary.csv --demos experts/demos.jsonl
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ciail/harness/checkpoints.hpp"
#include "ciail/harness/config.hpp"
#include "ciail/harness/demos.hpp"
#include "ciail/harness/expert.hpp"
#include "ciail/harness/pipeline.hpp"
#include "ciail/harness/report.hpp"

using namespace ciail;
using namespace ciail::harness;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string env;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config file (key = value lines)");
  app->add_option("--seed", c.seed, "Seed; replaces the configured seed list");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--env", c.env, "Environment")->check(CLI::IsMember({"move_point", "point_mass", "spur_point"}));
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (!c.env.empty()) cfg.imitation.env.id = envs::env_id_from_string(c.env);
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.validate();
  return cfg;
}

std::string expert_path(const fs::path& dir, int e) { return (dir / ("expert_" + std::to_string(e) + ".ckpt")).string(); }

int train_expert(const Common& c, std::optional<int> only) {
  const ExperimentConfig cfg = resolve(c);
  fs::create_directories(c.out);
  const envs::EnvSpec spec = expert_env(cfg.imitation.env);
  const std::uint64_t seed = cfg.seeds.front();
  for (int e = 0; e < spec.n_settings; ++e) {
    if (only && *only != e) continue;
    std::printf("setting %d\n", e);
    auto res = gen_expert(spec, e, cfg.expert, derive_seed(seed, static_cast<std::uint64_t>(e)),
                          [](const ExpertEvalPoint& p) {
                            std::printf("  round %4d  shaped %9.3f  gt %9.3f  waypoint %.2f\n", p.round + 1,
                                        p.shaped_mean, p.gt_mean, p.waypoint_rate);
                            std::fflush(stdout);
                          });
    PolicyMeta meta;
    meta.role = PolicyRole::expert;
    meta.env = spec.id;
    meta.obs_dim = kExpertObsDim;
    meta.discrete = envs::is_discrete(spec.id);
    meta.setting = e;
    meta.stats = ExpertStats{res.stochastic_eval.gt_mean, res.stochastic_eval.gt_std, res.best_shaped,
                             res.final_eval.shaped_mean, res.random_shaped, res.final_eval.waypoint_rate,
                             static_cast<double>(res.rounds_run)}
                     .pack();
    save_policy(expert_path(c.out, e), *res.policy, meta);

    std::string curve = "round,shaped_return,gt_return,waypoint_rate\n";
    for (const auto& p : res.curve) {
      curve += std::to_string(p.round) + "," + fmt(p.shaped_mean) + "," + fmt(p.gt_mean) + "," +
               fmt(p.waypoint_rate) + "\n";
    }
    write_file(fs::path(c.out) / ("expert_" + std::to_string(e) + "_curve.csv"), curve);

    std::printf("  rounds %d, final/best normalized %.3f, stochastic gt %.3f±%.3f\n", res.rounds_run,
                res.normalized_final(), res.stochastic_eval.gt_mean, res.stochastic_eval.gt_std);
    if (!res.plateaued || res.normalized_final() < 0.9) {
      std::fprintf(stderr, "warning: setting %d expert ended without a plateau at 0.9 of its best return\n", e);
    }
  }
  return 0;
}

int collect(const Common& c, const std::string& experts_dir, std::optional<int> trajectories) {
  ExperimentConfig cfg = resolve(c);
  if (trajectories) cfg.demo_trajectories = *trajectories;
  const envs::EnvSpec spec = cfg.imitation.env;
  const fs::path dir = experts_dir.empty() ? fs::path(c.out) : fs::path(experts_dir);
  std::vector<LoadedPolicy> experts;
  std::vector<const rl::Policy*> views;
  for (int e = 0; e < spec.n_settings; ++e) {
    auto lp = load_policy(expert_path(dir, e), cfg.expert.hidden, cfg.expert.activation);
    if (lp.meta.role != PolicyRole::expert || lp.meta.setting != e) {
      throw LoadError(expert_path(dir, e) + " is not the expert for setting " + std::to_string(e));
    }
    if (lp.meta.env != expert_env(spec).id) {
      throw LoadError(expert_path(dir, e) + " was trained on " + envs::to_string(lp.meta.env));
    }
    experts.push_back(std::move(lp));
  }
  for (const auto& lp : experts) views.push_back(lp.policy.get());
  std::vector<double> gt;
  const DemoSet d = collect_demos(views, spec, cfg.demo_trajectories, cfg.seeds.front(), &gt);
  fs::create_directories(c.out);
  const auto path = fs::path(c.out) / "demos.jsonl";
  save_demos(path.string(), d);
  const auto [m, s] = mean_std(gt);
  std::printf("wrote %zu trajectories to %s; ground-truth return %.3f±%.3f\n", d.trajectories.size(),
              path.c_str(), m, s);
  for (const auto& lp : experts) {
    const auto st = ExpertStats::unpack(lp.meta.stats);
    std::printf("  expert %d: recorded return %.3f±%.3f\n", lp.meta.setting, st.gt_mean, st.gt_std);
  }
  return 0;
}

int imitate(const Common& c, const std::string& demos_path) {
  const ExperimentConfig cfg = resolve(c);
  const DemoSet d = load_demos(demos_path);
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = (fs::path(c.out) / ("seed" + std::to_string(seed))).string();
    auto r = run_imitation(cfg, d, seed, dir);
    if (r.final_mean) {
      std::printf("seed %llu: final eval return %.3f±%.3f (%s)\n", static_cast<unsigned long long>(seed),
                  *r.final_mean, *r.final_std, dir.c_str());
    } else {
      std::printf("seed %llu: no evaluation (%s)\n", static_cast<unsigned long long>(seed), dir.c_str());
    }
  }
  return 0;
}

int run_sweep(const Common& c, const std::string& demos_path, int jobs) {
  const ExperimentConfig cfg = resolve(c);
  const DemoSet d = load_demos(demos_path);
  fs::create_directories(c.out);
  save_config((fs::path(c.out) / "config.txt").string(), cfg);
  const auto res = sweep(cfg, d, c.out, jobs, {}, [](const SweepCell& cell, std::size_t s) {
    const auto seed = static_cast<unsigned long long>(cell.seeds[s]);
    if (cell.errors[s].empty()) {
      std::printf("n_updates=%d %s seed %llu: %.3f\n", cell.n_updates, cell.label().c_str(), seed, *cell.finals[s]);
    } else {
      std::printf("n_updates=%d %s seed %llu: FAILED %s\n", cell.n_updates, cell.label().c_str(), seed,
                  cell.errors[s].c_str());
    }
    std::fflush(stdout);
  });
  write_file(fs::path(c.out) / "summary.csv", summary_csv(res));
  write_file(fs::path(c.out) / "failures.csv", failures_csv(res));
  std::cout << render_summary(read_summary(summary_csv(res)), {expert_reference(d), std::nullopt});
  return 0;
}

int evaluate(const Common& c, const std::string& ckpt, std::optional<int> episodes) {
  const ExperimentConfig cfg = resolve(c);
  const auto recs = numcore::load_checkpoint(ckpt);
  const PolicyMeta meta = read_meta(recs);
  const bool expert = meta.role == PolicyRole::expert;
  const auto lp = expert ? load_policy(ckpt, cfg.expert.hidden, cfg.expert.activation)
                         : load_policy(ckpt, cfg.imitation.policy_hidden, cfg.imitation.policy_activation);
  envs::EnvSpec spec = cfg.imitation.env;
  if (c.env.empty()) spec.id = meta.env;
  const int n = episodes.value_or(cfg.imitation.eval_episodes);
  Rng rng(derive_seed(cfg.seeds.front(), 2000));
  if (expert) {
    if (expert_env(spec).id != meta.env) throw LoadError("checkpoint does not match env " + std::string(envs::to_string(spec.id)));
    spec.setting = meta.setting;
    const auto ev = evaluate_shaped(policy_controller(*lp.policy, true), expert_env(spec), n, rng);
    std::printf("expert setting %d: ground-truth return %.3f±%.3f, expert-reward return %.3f, waypoint %.2f\n",
                meta.setting, ev.gt_mean, ev.gt_std, ev.shaped_mean, ev.waypoint_rate);
  } else {
    if (spec.id != meta.env) throw LoadError("checkpoint does not match env " + std::string(envs::to_string(spec.id)));
    const auto ev = rl::evaluate_policy(*lp.policy, spec, n, true, rng);
    std::printf("ground-truth return %.3f±%.3f over %d episodes\n", ev.mean, ev.std, n);
  }
  return 0;
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int report(const Common& c, const std::vector<std::string>& files, const std::string& demos_path,
           std::optional<double> expert_ref) {
  const ExperimentConfig cfg = resolve(c);
  ReportRefs refs;
  refs.expert = expert_ref;
  if (!demos_path.empty()) {
    const DemoSet d = load_demos(demos_path);
    refs.expert = expert_reference(d);
    envs::EnvSpec spec = cfg.imitation.env;
    spec.id = d.header.env_id;
    refs.random = reference_returns(spec, 100, 0).random;
  }
  std::vector<RunSummary> runs;
  for (const auto& f : files) {
    const std::string text = read_text(f);
    try {
      if (is_summary(text)) {
        std::cout << render_summary(read_summary(text), refs) << "\n";
        continue;
      }
      runs.push_back(read_metrics(text, f));
    } catch (const ParseError& e) {
      throw ParseError(e.line(), f + ": " + e.what());
    }
  }
  if (!runs.empty()) {
    std::cout << render_runs(runs, refs);
    fs::create_directories(c.out);
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto path = fs::path(c.out) / ("curve_" + std::to_string(k) + ".csv");
      write_file(path, curve_csv(runs[k]));
      std::cout << "learning curve of " << runs[k].name << " -> " << path.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causally invariant adversarial imitation learning"};
  app.require_subcommand(1);

  Common common;
  std::optional<int> setting, trajectories, episodes, jobs_opt;
  std::string experts_dir, demos, checkpoint;
  std::vector<std::string> files;
  std::optional<double> expert_ref;

  auto* te = app.add_subcommand("train-expert", "PPO experts on the per-setting expert reward");
  add_common(te, common);
  te->add_option("--setting", setting, "Train only this setting");

  auto* cd = app.add_subcommand("collect-demos", "Record expert demonstrations");
  add_common(cd, common);
  cd->add_option("--experts", experts_dir, "Directory holding expert_<e>.ckpt (default: --out)");
  cd->add_option("--trajectories", trajectories, "Total trajectories, spread evenly over settings");

  auto* im = app.add_subcommand("imitate", "Adversarial imitation, one run per seed");
  add_common(im, common);
  im->add_option("--demos", demos, "Demonstration file")->required();

  auto* sw = app.add_subcommand("sweep", "lambda x n_updates grid plus an ERM column");
  add_common(sw, common);
  sw->add_option("--demos", demos, "Demonstration file")->required();
  sw->add_option("--jobs", jobs_opt, "Parallel runs");

  auto* ev = app.add_subcommand("evaluate", "Ground-truth evaluation of a policy checkpoint");
  add_common(ev, common);
  ev->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  ev->add_option("--episodes", episodes, "Evaluation episodes");

  auto* rp = app.add_subcommand("report", "Tables and learning curves from metrics or summary CSVs");
  add_common(rp, common);
  rp->add_option("files", files, "metrics.csv or summary.csv files")->required();
  rp->add_option("--demos", demos, "Demonstrations for the expert reference line");
  rp->add_option("--expert-reference", expert_ref, "Expert reference return");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*te) return train_expert(common, setting);
    if (*cd) return collect(common, experts_dir, trajectories);
    if (*im) return imitate(common, demos);
    if (*sw) return run_sweep(common, demos, jobs_opt.value_or(1));
    if (*ev) return evaluate(common, checkpoint, episodes);
    if (*rp) return report(common, files, demos, expert_ref);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
