#include <cmath>

#include <gtest/gtest.h>

#include "ciail/disc/discriminator.hpp"
#include "test_util.hpp"

using namespace ciail;
using namespace ciail::disc;
using ciail::testing::random_tensor;

namespace {

DiscSpec small_spec(HeadKind head, InputMode mode, std::vector<std::size_t> hidden = {6},
                    Activation act = Activation::tanh) {
  DiscSpec s;
  s.head = head;
  s.mode = mode;
  s.hidden = std::move(hidden);
  s.activation = act;
  s.obs_dim = 3;
  s.space = {true, 4};
  return s;
}

DiscBatch random_batch(Rng& rng, std::size_t n, bool with_log_pi) {
  DiscBatch b;
  b.s = random_tensor(rng, n, 3);
  b.s_next = random_tensor(rng, n, 3);
  b.a = Tensor::zeros(n, 4);
  for (std::size_t i = 0; i < n; ++i) b.a(i, uniform_index(rng, 4)) = 1.0;
  if (with_log_pi) b.log_pi = random_tensor(rng, n, 1, -2.0, -0.1);
  return b;
}

Tensor labels_alternating(std::size_t n) {
  Tensor y = Tensor::zeros(n, 1);
  for (std::size_t i = 0; i < n; i += 2) y[i] = 1.0;
  return y;
}

// Central difference of the per-setting mean BCE of (w * z) at w = 1.
double irm_fd(const Tensor& z, const Tensor& y, double h = 1e-6) {
  auto f = [&](double w) {
    Tensor zz = z;
    for (double& v : zz.data()) v *= w;
    return bce_loss(zz, y);
  };
  return (f(1 + h) - f(1 - h)) / (2 * h);
}

double objective_value(const Discriminator& d, const std::vector<SettingBatch>& b, RegKind kind,
                       double lambda, const GpInputs* gp) {
  Tape tape;
  return disc_objective(tape, d, b, kind, lambda, gp).total.value()[0];
}

// Reverse-mode parameter gradients of the objective vs central differences.
void expect_objective_gradients(Discriminator d, const std::vector<SettingBatch>& batches, RegKind kind,
                                double lambda, const GpInputs* gp) {
  Tape tape;
  auto o = disc_objective(tape, d, batches, kind, lambda, gp);
  tape.backward(o.total);
  auto grads = d.gradients(tape, o.main);
  if (o.has_gp) {
    auto extra = d.gradients(tape, o.gp);
    for (std::size_t n = 0; n < grads.size(); ++n) {
      for (std::size_t k = 0; k < grads[n].size(); ++k) {
        for (std::size_t i = 0; i < grads[n][k].size(); ++i) grads[n][k][i] += extra[n][k][i];
      }
    }
  }
  const double h = 1e-6;
  for (std::size_t n = 0; n < d.nets().size(); ++n) {
    for (std::size_t k = 0; k < d.nets()[n].params().size(); ++k) {
      for (std::size_t i = 0; i < d.nets()[n].params()[k].size(); ++i) {
        const double orig = d.nets()[n].params()[k][i];
        d.nets()[n].mutable_params()[k][i] = orig + h;
        const double up = objective_value(d, batches, kind, lambda, gp);
        d.nets()[n].mutable_params()[k][i] = orig - h;
        const double dn = objective_value(d, batches, kind, lambda, gp);
        d.nets()[n].mutable_params()[k][i] = orig;
        const double fd = (up - dn) / (2 * h);
        ASSERT_TRUE(numcore::grad_close(grads[n][k][i], fd, 1e-4, 1e-6))
            << "net " << n << " param " << k << "[" << i << "]: " << grads[n][k][i] << " vs " << fd;
      }
    }
  }
}

}  // namespace

TEST(Bce, Examples) {
  EXPECT_NEAR(bce_loss(Tensor::filled(3, 1, 0.0), Tensor::from_rows({{1}, {0}, {1}})), std::log(2.0), 1e-15);
  const double sat = bce_loss(Tensor::filled(1, 1, 50.0), Tensor::filled(1, 1, 1.0));
  EXPECT_TRUE(std::isfinite(sat));
  EXPECT_LT(sat, 1e-20);
  EXPECT_NEAR(bce_loss(Tensor::from_rows({{1}, {-1}}), Tensor::from_rows({{1}, {0}})), 0.313261687518223, 1e-12);
}

TEST(Bce, GraphAgreesWithValue) {
  Rng rng(1);
  const Tensor z = random_tensor(rng, 20, 1, -30, 30);
  const Tensor y = labels_alternating(20);
  Tape tape;
  EXPECT_NEAR(bce_graph(tape.leaf(z), y).value()[0], bce_loss(z, y), 1e-13);
}

TEST(Irm, Examples) {
  EXPECT_EQ(irm_penalty({Tensor::zeros(4, 1)}, {labels_alternating(4)}), 0.0);
  const double g = irm_gradient(Tensor::filled(1, 1, 1.0), Tensor::filled(1, 1, 1.0));
  EXPECT_NEAR(g, -0.2689414213699951, 1e-12);
  EXPECT_NEAR(irm_penalty({Tensor::filled(1, 1, 1.0)}, {Tensor::filled(1, 1, 1.0)}), 0.0723294881, 1e-9);
  EXPECT_NEAR(irm_fd(Tensor::filled(1, 1, 1.0), Tensor::filled(1, 1, 1.0)), g, 1e-8);
  // Calibrated: sigmoid(z) equals the label to double precision.
  EXPECT_LT(irm_penalty({Tensor::from_rows({{50}, {-50}})}, {Tensor::from_rows({{1}, {0}})}), 1e-30);
  EXPECT_THROW(irm_penalty({Tensor()}, {Tensor()}), ContractError);
  EXPECT_THROW(irm_penalty({}, {}), ContractError);
}

TEST(Irm, MatchesScalarMultiplierFiniteDifference) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t settings = 1 + uniform_index(rng, 4);
    std::vector<Tensor> z, y;
    double fd_pen = 0.0;
    for (std::size_t e = 0; e < settings; ++e) {
      const std::size_t n = 1 + uniform_index(rng, 20);
      z.push_back(random_tensor(rng, n, 1, -5, 5));
      Tensor lab = Tensor::zeros(n, 1);
      for (double& v : lab.data()) v = uniform01(rng) < 0.5 ? 1.0 : 0.0;
      y.push_back(lab);
      const double g = irm_fd(z.back(), lab);
      fd_pen += g * g;
    }
    EXPECT_NEAR(irm_penalty(z, y), fd_pen, 1e-6);
    Tape tape;
    std::vector<Var> zv;
    for (const auto& t : z) zv.push_back(tape.leaf(t));
    EXPECT_NEAR(irm_penalty_graph(zv, y).value()[0], irm_penalty(z, y), 1e-13);
  }
}

TEST(Logits, GailZeroNetGivesHalf) {
  Rng rng(3);
  Discriminator d(small_spec(HeadKind::gail, InputMode::sas), rng);
  for (auto& net : d.nets()) {
    for (auto& p : net.mutable_params()) p.fill(0.0);
  }
  const Tensor z = d.logits(random_batch(rng, 5, false));
  for (double v : z.data()) {
    EXPECT_EQ(v, 0.0);
    EXPECT_EQ(numcore::detail::stable_sigmoid(v), 0.5);
  }
}

TEST(Logits, InputWidthsPerMode) {
  Rng rng(4);
  EXPECT_EQ(Discriminator(small_spec(HeadKind::gail, InputMode::s), rng).nets()[0].in_width(), 3u);
  EXPECT_EQ(Discriminator(small_spec(HeadKind::gail, InputMode::sa), rng).nets()[0].in_width(), 7u);
  EXPECT_EQ(Discriminator(small_spec(HeadKind::gail, InputMode::sas), rng).nets()[0].in_width(), 10u);
  Discriminator airl(small_spec(HeadKind::airl, InputMode::sas), rng);
  EXPECT_EQ(airl.g().in_width(), 7u);
  EXPECT_EQ(airl.h().in_width(), 3u);
  EXPECT_EQ(Discriminator(small_spec(HeadKind::airl, InputMode::s), rng).nets()[0].in_width(), 3u);
}

TEST(Airl, RequiresLogPi) {
  Rng rng(5);
  Discriminator d(small_spec(HeadKind::airl, InputMode::sas), rng);
  EXPECT_THROW(d.logits(random_batch(rng, 4, false)), ContractError);
}

TEST(Airl, ZeroPotentialReducesToG) {
  Rng rng(6);
  Discriminator d(small_spec(HeadKind::airl, InputMode::sas), rng);
  for (auto& p : d.h().mutable_params()) p.fill(0.0);
  const DiscBatch b = random_batch(rng, 10, true);
  const Tensor f = d.airl_f(b);
  const Tensor g = d.g().predict(detail::hcat({&b.s, &b.a}));
  const Tensor z = d.logits(b);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(f[i], g[i]);
    EXPECT_NEAR(z[i], g[i] - b.log_pi[i], 1e-15);
  }
}

TEST(Airl, ConstantShiftOfPotential) {
  Rng rng(7);
  for (double gamma : {1.0, 0.99, 0.5}) {
    DiscSpec spec = small_spec(HeadKind::airl, InputMode::sas);
    spec.gamma = gamma;
    Discriminator d(spec, rng);
    const DiscBatch b = random_batch(rng, 10, true);
    const Tensor f0 = d.airl_f(b);
    const double c = 0.75;
    d.h().mutable_params().back()[0] += c;  // output bias shifts h by c everywhere
    const Tensor f1 = d.airl_f(b);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(f1[i] - f0[i], c * (gamma - 1.0), 1e-12);
  }
  // Constant h with gamma = 1 telescopes away entirely.
  DiscSpec spec = small_spec(HeadKind::airl, InputMode::sa);
  spec.gamma = 1.0;
  Discriminator d(spec, rng);
  for (auto& p : d.h().mutable_params()) p.fill(0.0);
  d.h().mutable_params().back()[0] = 3.0;
  const DiscBatch b = random_batch(rng, 6, true);
  const Tensor f = d.airl_f(b);
  const Tensor g = d.g().predict(detail::hcat({&b.s, &b.a}));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(f[i], g[i], 1e-10);
}

TEST(Gp, ConstantDiscriminatorHasZeroPenalty) {
  Rng rng(8);
  Discriminator d(small_spec(HeadKind::gail, InputMode::sas), rng);
  for (auto& p : d.nets()[0].mutable_params()) p.fill(0.0);
  d.nets()[0].mutable_params().back()[0] = 1.3;
  EXPECT_EQ(gp_penalty(d, random_batch(rng, 8, false), random_batch(rng, 12, false), rng), 0.0);
  EXPECT_THROW(gp_penalty(d, DiscBatch{}, random_batch(rng, 3, false), rng), ContractError);
}

TEST(Gp, LinearLogitMatchesFiniteDifferences) {
  Rng rng(9);
  Discriminator d(small_spec(HeadKind::gail, InputMode::sas, {}), rng);
  const Mlp& net = d.nets()[0];
  const Tensor x = random_tensor(rng, 1, 10);
  Tape tape;
  GpInputs in{x, Tensor()};
  const double pen = gp_penalty_graph(tape, d, in, nullptr).value()[0];
  auto dsig = [&](std::span<const double> p) {
    Tensor xx = Tensor::row(p);
    return numcore::detail::stable_sigmoid(net.predict(xx)[0]);
  };
  const auto fd = numcore::finite_diff_grad(dsig, x.data(), 1e-6);
  double sq = 0.0;
  for (double g : fd) sq += g * g;
  EXPECT_NEAR(pen, sq, 1e-5);
  // sigma'(z) w per coordinate
  const double z = net.predict(x)[0];
  const double s = numcore::detail::stable_sigmoid(z);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(fd[j], s * (1 - s) * net.weight(0)[j], 1e-8);
}

TEST(Gp, MixupEndpoints) {
  Rng rng(10);
  const Tensor a = random_tensor(rng, 4, 3), b = random_tensor(rng, 4, 3);
  EXPECT_EQ(mixup(a, b, {1, 1, 1, 1}), a);
  EXPECT_EQ(mixup(a, b, {0, 0, 0, 0}), b);
  EXPECT_THROW(mixup(a, random_tensor(rng, 3, 3), {1, 1, 1, 1}), DimensionError);
}

TEST(Gp, AirlInputGradientMatchesFiniteDifferences) {
  Rng rng(11);
  Discriminator d(small_spec(HeadKind::airl, InputMode::sas), rng);
  const DiscBatch b = random_batch(rng, 3, true);
  const Tensor x = d.joint_input(b);
  Tape tape;
  auto lg = d.logits_graph(tape, tape.constant(x), b.log_pi);
  const Tensor analytic = d.input_gradient(tape, lg).value();
  for (std::size_t r = 0; r < 3; ++r) {
    auto f = [&](std::span<const double> p) {
      Tape t;
      Tensor row = Tensor::row(p);
      Tensor lp = Tensor::filled(1, 1, b.log_pi[r]);
      return d.logits_graph(t, t.constant(row), lp).z.value()[0];
    };
    const auto fd = numcore::finite_diff_grad(f, x.row_span(r), 1e-6);
    for (std::size_t j = 0; j < fd.size(); ++j) EXPECT_NEAR(analytic(r, j), fd[j], 1e-7);
  }
}

namespace {

std::vector<SettingBatch> random_settings(Rng& rng, std::size_t n_settings, bool log_pi) {
  std::vector<SettingBatch> out;
  for (std::size_t e = 0; e < n_settings; ++e) {
    const std::size_t n = 4 + uniform_index(rng, 5);
    out.push_back({static_cast<int>(e), random_batch(rng, n, log_pi), labels_alternating(n)});
  }
  return out;
}

}  // namespace

TEST(Objective, GradientsMatchFiniteDifferences) {
  Rng rng(12);
  for (HeadKind head : {HeadKind::gail, HeadKind::airl}) {
    for (int trial = 0; trial < 5; ++trial) {
      Discriminator d(small_spec(head, InputMode::sas, {5, 4}), rng);
      const auto batches = random_settings(rng, 3, head == HeadKind::airl);
      expect_objective_gradients(d, batches, RegKind::erm, 0.0, nullptr);
      expect_objective_gradients(d, batches, RegKind::irm, 2.5, nullptr);
      DiscBatch e = batches[0].rows, p = batches[1].rows;
      const GpInputs gp = gp_inputs(d, e, p, rng);
      expect_objective_gradients(d, batches, RegKind::gp, 10.0, &gp);
    }
  }
}

TEST(Objective, IrmReductions) {
  Rng rng(13);
  Discriminator d(small_spec(HeadKind::gail, InputMode::sa), rng);
  const auto batches = random_settings(rng, 3, false);
  Tape tape;
  auto o = disc_objective(tape, d, batches, RegKind::irm, 0.0, nullptr);
  double sum = 0.0;
  for (const auto& b : batches) sum += bce_loss(d.logits(b.rows), b.labels);
  EXPECT_NEAR(o.total.value()[0], sum, 1e-12);

  const std::vector<SettingBatch> single = {batches[0]};
  Tape t2;
  auto o2 = disc_objective(t2, d, single, RegKind::irm, 3.0, nullptr);
  const Tensor z = d.logits(single[0].rows);
  const double g = irm_gradient(z, single[0].labels);
  EXPECT_NEAR(o2.total.value()[0], bce_loss(z, single[0].labels) + 3.0 * g * g, 1e-12);
}

TEST(Update, ErmBceDecreasesOnSeparableData) {
  Rng rng(14);
  Discriminator d(small_spec(HeadKind::gail, InputMode::s, {}), rng);
  const std::size_t n = 40;
  DiscBatch b = random_batch(rng, n, false);
  Tensor y = Tensor::zeros(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = b.s(i, 0) > 0 ? 1.0 : 0.0;
    b.s(i, 0) += y[i] > 0 ? 0.2 : -0.2;  // margin
  }
  std::vector<SettingBatch> batches = {{0, b, y}};
  DiscOptimizer opt(d, numcore::AdamConfig{1e-2});
  RegConfig reg;
  double prev = bce_loss(d.logits(b), y);
  for (int i = 0; i < 50; ++i) {
    disc_update(d, batches, reg, 0.0, opt, rng);
    const double cur = bce_loss(d.logits(b), y);
    EXPECT_LT(cur, prev) << "update " << i;
    prev = cur;
  }
}

TEST(Update, SingleSettingIrmAtZeroLambdaTracksErm) {
  Rng rng(15);
  Discriminator a(small_spec(HeadKind::gail, InputMode::sas), rng);
  Discriminator b = a;
  const auto batches = random_settings(rng, 1, false);
  DiscOptimizer oa(a, {}), ob(b, {});
  Rng ra(1), rb(1);
  RegConfig erm, irm;
  irm.kind = RegKind::irm;
  erm.n_updates = irm.n_updates = 5;
  for (int round = 0; round < 4; ++round) {
    disc_update(a, batches, erm, 0.0, oa, ra);
    disc_update(b, batches, irm, 0.0, ob, rb);
    for (std::size_t k = 0; k < a.nets()[0].params().size(); ++k) {
      for (std::size_t i = 0; i < a.nets()[0].params()[k].size(); ++i) {
        EXPECT_NEAR(a.nets()[0].params()[k][i], b.nets()[0].params()[k][i], 1e-12);
      }
    }
  }
}

TEST(Update, ResultFieldsAndValidation) {
  Rng rng(16);
  Discriminator d(small_spec(HeadKind::airl, InputMode::sas), rng);
  auto batches = random_settings(rng, 2, true);
  DiscOptimizer opt(d, {});
  RegConfig reg;
  reg.kind = RegKind::gp;
  reg.lambda = 5.0;
  auto r = disc_update(d, batches, reg, 5.0, opt, rng);
  EXPECT_GE(r.penalty, 0.0);
  EXPECT_NEAR(r.total, r.loss + 5.0 * r.penalty, 1e-12);
  EXPECT_GE(r.accuracy, 0.0);
  EXPECT_LE(r.accuracy, 1.0);
  reg.n_updates = 0;
  EXPECT_THROW(disc_update(d, batches, reg, 5.0, opt, rng), ConfigError);
  reg.n_updates = 1;
  EXPECT_THROW(disc_update(d, {}, reg, 1.0, opt, rng), ContractError);
}

TEST(Update, LambdaWarmup) {
  RegConfig reg;
  reg.kind = RegKind::irm;
  reg.lambda = 10.0;
  EXPECT_NEAR(reg.effective_lambda(0), 1.0, 1e-15);
  EXPECT_NEAR(reg.effective_lambda(4), 5.0, 1e-15);
  EXPECT_EQ(reg.effective_lambda(9), 10.0);
  EXPECT_EQ(reg.effective_lambda(50), 10.0);
  reg.kind = RegKind::erm;
  EXPECT_EQ(reg.effective_lambda(50), 0.0);
}

TEST(Reward, Modes) {
  EXPECT_EQ(reward_from_logit(0.0, RewardMode::logit), 0.0);
  EXPECT_NEAR(reward_from_logit(0.0, RewardMode::neg_log_one_minus_d), std::log(2.0), 1e-15);
  for (int k = -5; k <= 5; ++k) {
    const double z = k;
    const double dz = 1.0 / (1.0 + std::exp(-z));
    EXPECT_NEAR(std::log(dz) - std::log(1 - dz), z, 1e-10);
    EXPECT_NEAR(reward_from_logit(z, RewardMode::neg_log_one_minus_d), -std::log(1 - dz), 1e-10);
  }
  for (RewardMode m : {RewardMode::logit, RewardMode::neg_log_one_minus_d}) {
    double prev = reward_from_logit(-40.0, m);
    for (double z = -39.5; z <= 40.0; z += 0.5) {
      const double r = reward_from_logit(z, m);
      EXPECT_GT(r, prev);
      prev = r;
    }
  }
  EXPECT_EQ(default_reward_mode(HeadKind::airl), RewardMode::logit);
  EXPECT_EQ(default_reward_mode(HeadKind::gail), RewardMode::neg_log_one_minus_d);
}

TEST(Encode, OneHotAndWidthChecks) {
  envs::ActionSpace space{true, 4};
  std::vector<envs::Transition> rows = {{{0.1, 0.2}, envs::Action{2}, {0.3, 0.4}, false, 0, 0},
                                        {{0.5, 0.6}, envs::Action{0}, {0.7, 0.8}, true, 1, 0}};
  const DiscBatch b = encode(rows, space);
  EXPECT_EQ(b.a, Tensor::from_rows({{0, 0, 1, 0}, {1, 0, 0, 0}}));
  EXPECT_EQ(b.s_next(1, 1), 0.8);
  rows[1].s_next = {0.0};
  EXPECT_THROW(encode(rows, space), DimensionError);
  rows[1].s_next = {0.0, 0.0};
  rows[1].a = envs::Action{4};
  EXPECT_THROW(encode(rows, space), ContractError);
  const auto cont = encode_action(envs::Action{envs::Vec2{0.5, -0.25}}, {false, 2});
  EXPECT_EQ(cont, (std::vector<double>{0.5, -0.25}));
}
