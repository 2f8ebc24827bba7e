#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "ciail/imitation/partition.hpp"
#include "ciail/imitation/trainer.hpp"
#include "test_util.hpp"

using namespace ciail;
using namespace ciail::imitation;
using ciail::testing::scripted_demos;

namespace {

Transition row(int setting, int round) {
  return {{0.0, 0.0, 0.0, 0.0}, envs::Action{0}, {0.0, 0.0, 0.0, 0.0}, false, setting, round};
}

std::vector<Transition> expert_rows(int sources, int per_source) {
  std::vector<Transition> out;
  for (int e = 0; e < sources; ++e) {
    for (int i = 0; i < per_source; ++i) out.push_back(row(e, 0));
  }
  return out;
}

ImitationConfig smoke_config(envs::EnvId id, Algo algo) {
  ImitationConfig c;
  c.env.id = id;
  c.env.horizon = 50;
  c.algo = algo;
  c.rollout_steps = 256;
  c.offpolicy_steps = 64;
  c.sac_updates_per_round = 8;
  c.sac.batch = 64;
  c.disc_policy_rows = 128;
  c.ppo.minibatch = 64;
  c.disc_hidden = {16};
  c.policy_hidden = {16};
  c.eval_episodes = 2;
  c.eval_every = 2;
  c.n_rounds = 4;
  c.seed = 3;
  return c;
}

std::vector<Transition> demos_for(const ImitationConfig& c, int per_setting = 1) {
  Rng rng(99);
  return scripted_demos(c.env, per_setting, rng);
}

}  // namespace

TEST(Partition, ExpertSourceCountsAndCover) {
  const auto expert = expert_rows(4, 100);
  std::vector<Transition> policy(400, row(0, 0));
  Rng rng(1);
  const Partition p = partition_settings(expert, policy, PartitionMode::expert_source, 5, rng);
  ASSERT_EQ(p.n_settings(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(p.keys[k], static_cast<int>(k));
    EXPECT_EQ(p.policy[k].size(), 100u);
    for (std::size_t i : p.expert[k]) EXPECT_EQ(expert[i].setting_id, static_cast<int>(k));
  }
  EXPECT_TRUE(is_exact_cover(p.policy, policy.size()));
  EXPECT_TRUE(is_exact_cover(p.expert, expert.size()));
}

TEST(Partition, ReplayRoundBalancedBuckets) {
  std::vector<Transition> policy;
  for (int i = 0; i < 64; ++i) policy.push_back(row(0, 1));
  for (int i = 0; i < 64; ++i) policy.push_back(row(0, 7));
  const auto expert = expert_rows(4, 32);
  Rng rng(2);
  const Partition p = partition_settings(expert, policy, PartitionMode::replay_round, 5, rng);
  ASSERT_EQ(p.n_settings(), 2u);
  EXPECT_EQ(p.keys, (std::vector<int>{0, 1}));
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(p.policy[k].size(), 64u);
    EXPECT_EQ(p.expert[k].size(), 64u);
    for (std::size_t i : p.policy[k]) EXPECT_EQ(round_bucket(policy[i].round_id, 5), p.keys[k]);
  }
  EXPECT_TRUE(is_exact_cover(p.policy, policy.size()));
  EXPECT_TRUE(is_exact_cover(p.expert, expert.size()));
  EXPECT_FALSE(p.single_setting_fallback);
}

TEST(Partition, DegenerateCases) {
  Rng rng(3);
  std::vector<Transition> policy(40, row(0, 2));
  const Partition one = partition_settings(expert_rows(1, 10), policy, PartitionMode::expert_source, 5, rng);
  EXPECT_EQ(one.n_settings(), 1u);
  const Partition single = partition_settings(expert_rows(2, 20), policy, PartitionMode::replay_round, 5, rng);
  EXPECT_TRUE(single.single_setting_fallback);
  EXPECT_EQ(single.n_settings(), 1u);
  // Fewer policy rows than sources leaves a setting with one label class.
  std::vector<Transition> few(2, row(0, 0));
  EXPECT_THROW(partition_settings(expert_rows(4, 5), few, PartitionMode::expert_source, 5, rng),
               DegenerateSettingError);
  EXPECT_THROW(partition_settings({}, few, PartitionMode::expert_source, 5, rng), DegenerateSettingError);
}

TEST(Partition, CoverPredicate) {
  EXPECT_TRUE(is_exact_cover({{0, 2}, {1}}, 3));
  EXPECT_FALSE(is_exact_cover({{0, 2}, {2, 1}}, 3));
  EXPECT_FALSE(is_exact_cover({{0}}, 2));
}

TEST(Trainer, ZeroRoundsReturnsUntrainedPolicy) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::ppo);
  c.n_rounds = 0;
  ImitationTrainer t(c, demos_for(c));
  const auto before = t.policy().net().params();
  EXPECT_TRUE(t.train().empty());
  EXPECT_EQ(t.policy().net().params(), before);
}

TEST(Trainer, OneMetricsRowPerRoundAndEvalCadence) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::ppo);
  c.n_rounds = 5;
  ImitationTrainer t(c, demos_for(c));
  const auto& m = t.train();
  ASSERT_EQ(m.size(), 5u);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(m[k].round, k);
    EXPECT_TRUE(std::isfinite(m[k].disc_loss));
    EXPECT_EQ(m[k].n_settings, 4);
  }
  EXPECT_FALSE(m[0].eval_mean.has_value());
  EXPECT_TRUE(m[1].eval_mean.has_value());
  EXPECT_TRUE(m[4].eval_mean.has_value());  // final round always evaluated
}

TEST(Trainer, TrainingRewardIsNotGroundTruth) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::ppo);
  c.n_rounds = 2;
  c.eval_every = 1;
  ImitationTrainer t(c, demos_for(c));
  for (const auto& m : t.train()) {
    ASSERT_TRUE(m.eval_mean.has_value());
    EXPECT_NE(m.train_reward_mean, *m.eval_mean / c.env.horizon);
    EXPECT_GT(m.train_reward_mean, 0.0);  // softplus rewards are positive; distances are not
  }
}

TEST(Trainer, SeededRunsAreBitwiseIdentical) {
  for (Algo algo : {Algo::ppo, Algo::sac}) {
    auto c = smoke_config(envs::EnvId::spur_point, algo);
    c.head = disc::HeadKind::airl;
    c.reg.kind = disc::RegKind::irm;
    c.reg.lambda = 1.0;
    const auto demos = demos_for(c);
    ImitationTrainer a(c, demos), b(c, demos);
    const auto& ma = a.train();
    const auto& mb = b.train();
    ASSERT_EQ(ma.size(), mb.size());
    for (std::size_t k = 0; k < ma.size(); ++k) {
      EXPECT_EQ(ma[k].disc_loss, mb[k].disc_loss);
      EXPECT_EQ(ma[k].penalty, mb[k].penalty);
      EXPECT_EQ(ma[k].train_reward_mean, mb[k].train_reward_mean);
      EXPECT_EQ(ma[k].eval_mean, mb[k].eval_mean);
    }
    EXPECT_EQ(a.policy().net().params(), b.policy().net().params());
  }
}

TEST(Trainer, SingleSourceErmMatchesZeroLambdaIrm) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::ppo);
  c.env.n_settings = 1;
  c.n_rounds = 3;
  const auto demos = demos_for(c, 2);
  ImitationTrainer erm(c, demos);
  c.reg.kind = disc::RegKind::irm;
  c.reg.lambda = 0.0;
  ImitationTrainer irm(c, demos);
  const auto& a = erm.train();
  const auto& b = irm.train();
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(a[k].disc_loss, b[k].disc_loss, 1e-9);
    EXPECT_EQ(a[k].n_settings, 1);
  }
  const auto& pa = erm.policy().net().params();
  const auto& pb = irm.policy().net().params();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k].size(); ++i) EXPECT_NEAR(pa[k][i], pb[k][i], 1e-8);
  }
}

TEST(Trainer, OffPolicyPartitionsCoverReplayRows) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::sac);
  c.bucket_span = 2;
  c.n_rounds = 8;
  ImitationTrainer t(c, demos_for(c));
  int events = 0;
  t.set_partition_observer([&](const PartitionEvent& ev) {
    ++events;
    EXPECT_TRUE(is_exact_cover(ev.partition->policy, ev.policy->size()));
    EXPECT_TRUE(is_exact_cover(ev.partition->expert, ev.expert->size()));
    for (std::size_t k = 0; k < ev.partition->n_settings(); ++k) {
      EXPECT_FALSE(ev.partition->policy[k].empty());
      EXPECT_FALSE(ev.partition->expert[k].empty());
    }
    if (ev.round >= 2) {
      EXPECT_GE(ev.partition->n_settings(), 2u);
    }
  });
  const auto& m = t.train();
  EXPECT_EQ(events, 8);
  EXPECT_EQ(m[0].degenerate, 1);  // one bucket: single-setting fallback
  for (int k = 2; k < 8; ++k) EXPECT_EQ(m[k].degenerate, 0);
  EXPECT_EQ(m[7].n_settings, 4);
  EXPECT_LE(t.replay().max_round(), 7);
}

TEST(Trainer, ContinuousEnvRuns) {
  for (Algo algo : {Algo::ppo, Algo::sac}) {
    auto c = smoke_config(envs::EnvId::point_mass, algo);
    c.n_rounds = 2;
    ImitationTrainer t(c, demos_for(c));
    const auto& m = t.train();
    ASSERT_EQ(m.size(), 2u);
    EXPECT_TRUE(std::isfinite(*m[1].eval_mean));
  }
}

TEST(Trainer, DemoEnvMismatchIsLoadError) {
  auto c = smoke_config(envs::EnvId::move_point, Algo::ppo);
  auto spur = c;
  spur.env.id = envs::EnvId::spur_point;
  EXPECT_THROW(ImitationTrainer(c, demos_for(spur)), LoadError);
  auto pm = c;
  pm.env.id = envs::EnvId::point_mass;
  EXPECT_THROW(ImitationTrainer(c, demos_for(pm)), LoadError);
  EXPECT_THROW(ImitationTrainer(c, {}), LoadError);
}

TEST(Trainer, DefaultSmokeRunWithinBudget) {
  ImitationConfig c;
  c.env.id = envs::EnvId::move_point;
  c.n_rounds = 10;
  c.seed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  ImitationTrainer t(c, demos_for(c, 3));
  const auto& m = t.train();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(m.size(), 10u);
  EXPECT_LT(secs, 60.0);
  std::cout << "10-round default smoke run: " << secs << " s\n";
}
