#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

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

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ciail_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::unique_ptr<rl::Policy>> untrained_experts(const envs::EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::unique_ptr<rl::Policy>> out;
  for (int e = 0; e < spec.n_settings; ++e) {
    out.push_back(rl::make_policy(kExpertObsDim, envs::action_space(spec.id), {8}, numcore::Activation::tanh, rng));
  }
  return out;
}

std::vector<const rl::Policy*> views(const std::vector<std::unique_ptr<rl::Policy>>& ps) {
  std::vector<const rl::Policy*> v;
  for (const auto& p : ps) v.push_back(p.get());
  return v;
}

DemoSet small_demos(envs::EnvId id, int n_traj = 4, int horizon = 20) {
  envs::EnvSpec spec;
  spec.id = id;
  spec.horizon = horizon;
  const auto experts = untrained_experts(spec, 5);
  return collect_demos(views(experts), spec, n_traj, 11);
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  auto& im = c.imitation;
  im.env.horizon = 30;
  im.rollout_steps = 128;
  im.ppo.minibatch = 64;
  im.disc_hidden = {8};
  im.policy_hidden = {8};
  im.n_rounds = 2;
  im.eval_every = 1;
  im.eval_episodes = 2;
  c.seeds = {0, 1};
  c.sweep_lambdas = {0.1, 1.0};
  c.sweep_n_updates = {1, 2};
  return c;
}

}  // namespace

TEST(Config, DefaultsRoundTripCanonically) {
  const ExperimentConfig c;
  const std::string text = to_text(c);
  EXPECT_EQ(to_text(parse_config(text)), text);
  EXPECT_EQ(to_text(parse_config("")), text);
  EXPECT_NE(text.find("seeds = 0,1,2,3,4\n"), std::string::npos);
  EXPECT_NE(text.find("sweep.lambdas = 0.01,0.1,1,10\n"), std::string::npos);
}

TEST(Config, OverridesCommentsAndLists) {
  const auto c = parse_config(
      "# comment\n\n env.id = spur_point \ndisc.reg.kind = irm  # trailing\n"
      "disc.reg.lambda = 2.5\ndisc.hidden = 32, 16\nseeds = 7\nalgo = sac\ndisc.reward_mode = logit\n");
  EXPECT_EQ(c.imitation.env.id, envs::EnvId::spur_point);
  EXPECT_EQ(c.imitation.reg.kind, disc::RegKind::irm);
  EXPECT_EQ(c.imitation.reg.lambda, 2.5);
  EXPECT_EQ(c.imitation.disc_hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7}));
  EXPECT_EQ(c.imitation.algo, imitation::Algo::sac);
  ASSERT_TRUE(c.imitation.reward_mode.has_value());
  EXPECT_EQ(to_text(parse_config(to_text(c))), to_text(c));
}

TEST(Config, RejectsUnknownKeysAndBadValuesWithLineNumbers) {
  try {
    parse_config("env.horizon = 10\nenv.colour = red\n");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("env.colour"), std::string::npos);
  }
  EXPECT_THROW(parse_config("env.horizon = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("env.horizon = 10.5\n"), ConfigError);
  EXPECT_THROW(parse_config("env.horizon\n"), ConfigError);
  EXPECT_THROW(parse_config("env.horizon = 10\nenv.horizon = 20\n"), ConfigError);
  EXPECT_THROW(parse_config("env.horizon = 0\n"), ConfigError);  // validation
  EXPECT_THROW(parse_config("disc.head = wgan\n"), ConfigError);
  EXPECT_THROW(parse_config("seeds = \n"), ConfigError);
}

// Every key accepts its own canonical value, and re-serialization is a fixed
// point after arbitrary accepted overrides.
TEST(Config, EveryKeyRoundTrips) {
  const ExperimentConfig base;
  for (const auto& key : config_keys()) {
    ExperimentConfig c = base;
    set_value(c, key, get_value(base, key));
    EXPECT_EQ(to_text(c), to_text(base)) << key;
  }
  const std::vector<std::pair<std::string, std::string>> overrides = {
      {"env.step_size", "0.1"},        {"ppo.lr", "0.00012345678901234"}, {"disc.input_mode", "sa"},
      {"train.partition", "replay_round"}, {"sweep.n_updates", "3,1"},   {"expert.activation", "relu"},
      {"disc.reg.lambda", "1e-7"},     {"replay.capacity", "5000"},       {"disc.head", "airl"}};
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::string text;
    for (const auto& [k, v] : overrides) {
      if (uniform01(rng) < 0.5) text += k + " = " + v + "\n";
    }
    const auto c = parse_config(text);
    const std::string canon = to_text(c);
    EXPECT_EQ(to_text(parse_config(canon)), canon);
  }
}

TEST(Config, FileRoundTrip) {
  const auto dir = scratch("config");
  ExperimentConfig c;
  c.imitation.reg.lambda = 0.3;
  save_config((dir / "c.txt").string(), c);
  EXPECT_EQ(to_text(load_config((dir / "c.txt").string())), to_text(c));
  EXPECT_THROW(load_config((dir / "missing.txt").string()), ConfigError);
}

TEST(Demos, EvenSplit) {
  EXPECT_EQ(even_split(12, 4), (std::vector<int>{3, 3, 3, 3}));
  EXPECT_EQ(even_split(10, 4), (std::vector<int>{3, 3, 2, 2}));
  const DemoSet d = small_demos(envs::EnvId::move_point, 12);
  std::vector<int> per(4, 0);
  for (const auto& tr : d.trajectories) ++per[static_cast<std::size_t>(tr.setting)];
  EXPECT_EQ(per, (std::vector<int>{3, 3, 3, 3}));
}

TEST(Demos, SaveLoadSaveIsByteExact) {
  const auto dir = scratch("demos");
  for (envs::EnvId id : {envs::EnvId::move_point, envs::EnvId::point_mass, envs::EnvId::spur_point}) {
    const DemoSet d = small_demos(id);
    const auto p1 = dir / "a.jsonl", p2 = dir / "b.jsonl";
    save_demos(p1.string(), d);
    const DemoSet back = load_demos(p1.string());
    EXPECT_TRUE(back == d);
    save_demos(p2.string(), back);
    EXPECT_EQ(slurp(p1), slurp(p2));
    EXPECT_EQ(back.header.env_id, id);
    EXPECT_EQ(back.header.obs_dim, envs::obs_dim(id));
  }
}

TEST(Demos, SpuriousChannelCarriesTheExpertSource) {
  const DemoSet d = small_demos(envs::EnvId::spur_point, 8, 50);
  for (const auto& tr : d.trajectories) {
    double s = 0.0;
    for (const auto& step : tr.steps) s += step.s[4];
    EXPECT_NEAR(s / static_cast<double>(tr.steps.size()), envs::spurious_center(tr.setting, 4), 0.03);
  }
}

TEST(Demos, MalformedFilesReportLines) {
  const std::string good = to_jsonl(small_demos(envs::EnvId::move_point, 1, 3));
  auto lines = split(good, '\n');
  try {
    from_jsonl(lines[0] + "\n" + lines[1] + "\n{not json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::string missing = lines[1];
  missing.replace(missing.find("\"done\""), 6, "\"dune\"");
  try {
    from_jsonl(lines[0] + "\n" + missing + "\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("done"), std::string::npos);
  }
  EXPECT_THROW(from_jsonl(""), ParseError);
  EXPECT_THROW(from_jsonl(lines[0] + "\n" + lines[2] + "\n"), ParseError);  // step 1 before step 0
  std::string bad_setting = lines[1];
  bad_setting.replace(bad_setting.find("\"setting\":0"), 11, "\"setting\":7");
  EXPECT_THROW(from_jsonl(lines[0] + "\n" + bad_setting + "\n"), LoadError);
}

TEST(Demos, ExpertMismatchIsLoadError) {
  envs::EnvSpec spec;
  spec.horizon = 5;
  auto experts = untrained_experts(spec, 1);
  auto v = views(experts);
  v.pop_back();
  EXPECT_THROW(collect_demos(v, spec, 4, 0), LoadError);
  envs::EnvSpec pm = spec;
  pm.id = envs::EnvId::point_mass;
  EXPECT_THROW(collect_demos(views(experts), pm, 4, 0), LoadError);
  Rng rng(0);
  auto narrow = rl::make_policy(4, envs::action_space(spec.id), {8}, numcore::Activation::tanh, rng);
  v = views(experts);
  v[0] = narrow.get();
  EXPECT_THROW(collect_demos(v, spec, 4, 0), LoadError);
}

TEST(Demos, RecordedReturnsMatchGroundTruth) {
  envs::EnvSpec spec;
  spec.horizon = 40;
  const auto experts = untrained_experts(spec, 2);
  std::vector<double> gt;
  const DemoSet d = collect_demos(views(experts), spec, 6, 3, &gt);
  ASSERT_EQ(gt.size(), d.trajectories.size());
  for (std::size_t k = 0; k < gt.size(); ++k) EXPECT_NEAR(trajectory_return(d.trajectories[k]), gt[k], 1e-12);
}

TEST(Checkpoint, PolicyRoundTripIsByteExact) {
  const auto dir = scratch("ckpt");
  Rng rng(9);
  for (envs::EnvId id : {envs::EnvId::move_point, envs::EnvId::point_mass}) {
    auto p = rl::make_policy(kExpertObsDim, envs::action_space(id), {16, 8}, numcore::Activation::tanh, rng);
    PolicyMeta m;
    m.role = PolicyRole::expert;
    m.env = id;
    m.obs_dim = kExpertObsDim;
    m.discrete = envs::is_discrete(id);
    m.setting = 2;
    m.stats = ExpertStats{-1.5, 0.25, -3, -4, -100, 0.9, 120}.pack();
    save_policy((dir / "a.ckpt").string(), *p, m);
    auto back = load_policy((dir / "a.ckpt").string(), {16, 8}, numcore::Activation::tanh);
    EXPECT_EQ(back.policy->net().params(), p->net().params());
    EXPECT_EQ(back.meta.setting, 2);
    EXPECT_EQ(back.meta.env, id);
    EXPECT_EQ(ExpertStats::unpack(back.meta.stats).waypoint_rate, 0.9);
    save_policy((dir / "b.ckpt").string(), *back.policy, back.meta);
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
    EXPECT_THROW(load_policy((dir / "a.ckpt").string(), {16}, numcore::Activation::tanh), LoadError);
  }
}

TEST(Expert, BudgetAndSeedsProduceDistinctCheckpoints) {
  ExpertConfig c;
  c.budget_rounds = 3;
  c.rollout_steps = 256;
  c.eval_every = 1;
  c.eval_episodes = 3;
  c.hidden = {8};
  c.ppo.minibatch = 64;
  envs::EnvSpec spec;
  spec.horizon = 30;
  const auto a = gen_expert(spec, 1, c, 0);
  const auto b = gen_expert(spec, 1, c, 1);
  EXPECT_EQ(a.rounds_run, 3);
  EXPECT_EQ(a.curve.size(), 3u);
  EXPECT_NE(a.policy->net().params(), b.policy->net().params());
  EXPECT_EQ(a.policy->obs_dim(), kExpertObsDim);
  EXPECT_LE(a.normalized_final(), 1.0 + 1e-12);
  EXPECT_THROW(gen_expert(spec, 4, c, 0), ConfigError);
  const auto again = gen_expert(spec, 1, c, 0);
  EXPECT_EQ(again.policy->net().params(), a.policy->net().params());
}

TEST(Expert, DemoReturnsTrackTheGeneratingExpert) {
  ExpertConfig c;
  c.budget_rounds = 4;
  c.rollout_steps = 512;
  c.eval_every = 2;
  c.eval_episodes = 40;
  c.hidden = {16};
  envs::EnvSpec spec;
  spec.horizon = 60;
  spec.n_settings = 1;
  const auto ex = gen_expert(spec, 0, c, 2);
  std::vector<double> gt;
  collect_demos({ex.policy.get()}, spec, 10, 5, &gt);
  const auto [m, s] = mean_std(gt);
  EXPECT_LE(std::abs(m - ex.stochastic_eval.gt_mean), ex.stochastic_eval.gt_std);
  (void)s;
}

TEST(Run, MetricsCsvSchemaAndDeterminism) {
  const auto cfg = tiny_config();
  const DemoSet d = small_demos(envs::EnvId::move_point);
  const auto dir = scratch("run");
  run_imitation(cfg, d, 4, (dir / "a").string());
  run_imitation(cfg, d, 4, (dir / "b").string());
  const std::string m = slurp(dir / "a" / "metrics.csv");
  EXPECT_EQ(m, slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(m.substr(0, m.find('\n')),
            "round,disc_loss,penalty,disc_accuracy,train_reward_mean,eval_return_mean,eval_return_std,lambda,"
            "n_settings,degenerate,stale_signal");
  const auto table = parse_csv(m);
  EXPECT_EQ(table.rows.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "a" / "timing.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "policy.ckpt"));
  const auto resolved = load_config((dir / "a" / "config.txt").string());
  EXPECT_EQ(resolved.seeds, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(resolved.imitation.n_rounds, 2);
}

TEST(Run, DemoEnvMismatchIsLoadError) {
  auto cfg = tiny_config();
  cfg.imitation.env.id = envs::EnvId::spur_point;
  EXPECT_THROW(run_imitation(cfg, small_demos(envs::EnvId::move_point), 0), LoadError);
}

TEST(Sweep, GridShapeAndOrderInvariance) {
  const auto cfg = tiny_config();
  const DemoSet d = small_demos(envs::EnvId::move_point);
  int runs = 0;
  const auto a = sweep(cfg, d, {}, 1, {}, [&](const SweepCell&, std::size_t) { ++runs; });
  EXPECT_EQ(runs, 2 * 3 * 2);
  ASSERT_EQ(a.cells.size(), 2u);
  ASSERT_EQ(a.cells[0].size(), 3u);
  EXPECT_EQ(a.columns, (std::vector<std::string>{"lambda=0.1", "lambda=1", "erm"}));
  for (const auto& row : a.cells) {
    for (const auto& c : row) {
      EXPECT_EQ(c.successes().size(), 2u);
      for (const auto& e : c.errors) EXPECT_TRUE(e.empty()) << e;
    }
  }
  std::vector<std::size_t> reversed(12);
  for (std::size_t k = 0; k < 12; ++k) reversed[k] = 11 - k;
  const auto b = sweep(cfg, d, {}, 2, reversed);
  EXPECT_EQ(summary_csv(a), summary_csv(b));
  const auto table = read_summary(summary_csv(a));
  EXPECT_EQ(table.row_labels, (std::vector<std::string>{"1", "2"}));
  EXPECT_EQ(table.columns, a.columns);
}

TEST(Sweep, CountsForTheFullGrid) {
  ExperimentConfig c;
  c.seeds = {0, 1, 2};
  const std::size_t irm = c.sweep_lambdas.size() * c.sweep_n_updates.size() * c.seeds.size();
  const std::size_t erm = c.sweep_n_updates.size() * c.seeds.size();
  EXPECT_EQ(irm, 48u);
  EXPECT_EQ(erm, 12u);
}

TEST(Sweep, SummaryAggregatesAndRecordsFailures) {
  SweepResult r;
  r.rows = {1};
  r.columns = {"lambda=1", "erm"};
  SweepCell ok;
  ok.seeds = {0, 1, 2};
  ok.lambda = 1.0;
  ok.finals = {-10.0, -20.0, std::nullopt};
  ok.errors = {"", "", "diverged"};
  SweepCell bad;
  bad.seeds = {0};
  bad.finals = {std::nullopt};
  bad.errors = {"boom"};
  r.cells = {{ok, bad}};
  const std::string s = summary_csv(r);
  EXPECT_EQ(s, "n_updates,lambda=1,erm\n1,-15±5,failed\n");
  EXPECT_EQ(failures_csv(r), "cell,seed,error\nn1_lambda=1,2,diverged\nn1_erm,0,boom\n");
}

TEST(Report, SingleRunIsOneCell) {
  const std::string m =
      "round,disc_loss,penalty,disc_accuracy,train_reward_mean,eval_return_mean,eval_return_std,lambda,"
      "n_settings,degenerate,stale_signal\n0,0.6,0,0.5,0.7,,,0,4,0,0\n1,0.6,0,0.5,0.7,-12.5,1.5,0,4,0,0\n";
  const auto run = read_metrics(m, "seed0");
  ASSERT_TRUE(run.final_eval.has_value());
  EXPECT_EQ(run.final_eval->mean, -12.5);
  EXPECT_EQ(curve_csv(run), "round,eval_return_mean,eval_return_std\n1,-12.5,1.5\n");
  const std::string table = render_runs({run}, {-10.0, -110.0});
  EXPECT_NE(table.find("| seed0 | -12.50±1.50 (0.975) * |"), std::string::npos);
  EXPECT_NE(table.find("expert reference: -10.00"), std::string::npos);
}

TEST(Report, MissingColumnNamesIt) {
  try {
    read_metrics("round,disc_loss,eval_return_std\n0,1,2\n", "x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("eval_return_mean"), std::string::npos);
  }
  try {
    read_metrics("round,eval_return_mean,eval_return_std\n0,1,2\n1,2\n", "x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(read_metrics("round,eval_return_mean,eval_return_std\n0,abc,2\n", "x"), ParseError);
}

TEST(Report, SummaryKeepsGridOrderAndMarksRowBest) {
  const std::string s = "n_updates,lambda=0.01,lambda=10,erm\n5,-3±1,-2±1,-4±0\n1,-1±0,failed,-9±2\n";
  const auto t = read_summary(s);
  const std::string out = render_summary(t, {});
  EXPECT_NE(out.find("best cell in each row"), std::string::npos);
  const auto r5 = out.find("| 5 |"), r1 = out.find("| 1 |");
  ASSERT_NE(r5, std::string::npos);
  ASSERT_NE(r1, std::string::npos);
  EXPECT_LT(r5, r1);
  EXPECT_NE(out.find("| 5 | -3.00±1.00 | -2.00±1.00 * | -4.00±0.00 |"), std::string::npos);
  EXPECT_NE(out.find("| 1 | -1.00±0.00 * | failed | -9.00±2.00 |"), std::string::npos);
  EXPECT_LT(out.find("lambda=0.01"), out.find("lambda=10"));
  EXPECT_NE(out.find("expert reference: unavailable"), std::string::npos);
}
