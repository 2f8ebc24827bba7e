#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"
#include "ciail/numcore.hpp"

namespace ciail::disc {

using numcore::Activation;
using numcore::Mlp;
using numcore::MlpSpec;
using numcore::MlpTrace;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

enum class HeadKind { gail, airl };
enum class InputMode { s, sa, sas };
enum class RewardMode { logit, neg_log_one_minus_d };

inline const char* to_string(HeadKind k) { return k == HeadKind::gail ? "gail" : "airl"; }
inline const char* to_string(InputMode m) {
  switch (m) {
    case InputMode::s: return "s";
    case InputMode::sa: return "sa";
    case InputMode::sas: return "sas";
  }
  return "?";
}
inline const char* to_string(RewardMode m) {
  return m == RewardMode::logit ? "logit" : "neg_log_one_minus_d";
}

inline HeadKind head_from_string(const std::string& s) {
  if (s == "gail") return HeadKind::gail;
  if (s == "airl") return HeadKind::airl;
  throw ConfigError("unknown discriminator head '" + s + "'");
}
inline InputMode input_mode_from_string(const std::string& s) {
  if (s == "s") return InputMode::s;
  if (s == "sa") return InputMode::sa;
  if (s == "sas") return InputMode::sas;
  throw ConfigError("unknown discriminator input mode '" + s + "'");
}
inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "logit") return RewardMode::logit;
  if (s == "neg_log_one_minus_d") return RewardMode::neg_log_one_minus_d;
  throw ConfigError("unknown reward mode '" + s + "'");
}

inline RewardMode default_reward_mode(HeadKind k) {
  return k == HeadKind::airl ? RewardMode::logit : RewardMode::neg_log_one_minus_d;
}

// Column blocks of a batch of transitions. Discrete actions are one-hot.
struct DiscBatch {
  Tensor s;
  Tensor a;
  Tensor s_next;
  Tensor log_pi;  // n x 1; required by AIRL, empty otherwise

  std::size_t size() const { return s.rows(); }
};

inline std::vector<double> encode_action(const envs::Action& a, const envs::ActionSpace& space) {
  std::vector<double> out(space.encoded_width(), 0.0);
  if (space.discrete) {
    const int i = std::get<int>(a);
    if (i < 0 || i >= space.n) throw ContractError("action index outside the action space");
    out[static_cast<std::size_t>(i)] = 1.0;
  } else {
    const auto& v = std::get<envs::Vec2>(a);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = v[j];
  }
  return out;
}

inline DiscBatch encode(std::span<const envs::Transition> rows, const envs::ActionSpace& space) {
  if (rows.empty()) return {};
  const std::size_t d = rows.front().s.size(), k = space.encoded_width();
  DiscBatch b{Tensor::zeros(rows.size(), d), Tensor::zeros(rows.size(), k),
              Tensor::zeros(rows.size(), d), Tensor()};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& t = rows[i];
    if (t.s.size() != d || t.s_next.size() != d) {
      throw DimensionError("transition " + std::to_string(i) + " has observation width " +
                           std::to_string(t.s.size()) + ", expected " + std::to_string(d));
    }
    std::copy(t.s.begin(), t.s.end(), b.s.row_span(i).begin());
    std::copy(t.s_next.begin(), t.s_next.end(), b.s_next.row_span(i).begin());
    const auto a = encode_action(t.a, space);
    std::copy(a.begin(), a.end(), b.a.row_span(i).begin());
  }
  return b;
}

namespace detail {
inline Tensor hcat(const std::vector<const Tensor*>& parts) {
  const std::size_t n = parts.front()->rows();
  std::size_t w = 0;
  for (const Tensor* p : parts) w += p->cols();
  Tensor out = Tensor::zeros(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (const Tensor* p : parts) {
      std::copy_n(p->row_span(i).begin(), p->cols(), out.row_span(i).begin() + static_cast<std::ptrdiff_t>(off));
      off += p->cols();
    }
  }
  return out;
}

inline Tensor vcat(const Tensor& a, const Tensor& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  Tensor out = Tensor::zeros(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

inline Tensor take_rows(const Tensor& t, const std::vector<std::size_t>& idx) {
  if (t.size() == 0) return t;
  Tensor out = Tensor::zeros(idx.size(), t.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(t.row_span(idx[i]).begin(), t.cols(), out.row_span(i).begin());
  }
  return out;
}
}  // namespace detail

inline DiscBatch concat(const DiscBatch& a, const DiscBatch& b) {
  if ((a.log_pi.size() == 0) != (b.log_pi.size() == 0) && a.size() > 0 && b.size() > 0) {
    throw ContractError("concatenating batches with and without log_pi");
  }
  return {detail::vcat(a.s, b.s), detail::vcat(a.a, b.a), detail::vcat(a.s_next, b.s_next),
          detail::vcat(a.log_pi, b.log_pi)};
}

inline DiscBatch take(const DiscBatch& b, const std::vector<std::size_t>& idx) {
  return {detail::take_rows(b.s, idx), detail::take_rows(b.a, idx), detail::take_rows(b.s_next, idx),
          detail::take_rows(b.log_pi, idx)};
}

struct DiscSpec {
  HeadKind head = HeadKind::gail;
  InputMode mode = InputMode::sas;
  std::vector<std::size_t> hidden = {64, 64};
  Activation activation = Activation::relu;
  double gamma = 0.99;  // AIRL shaping discount
  std::size_t obs_dim = 4;
  envs::ActionSpace space;
};

// Recorded logit computation with the traces needed for parameter gradients.
struct LogitGraph {
  Var z;                      // n x 1
  std::vector<MlpTrace> net0; // GAIL D or AIRL g
  std::vector<MlpTrace> net1; // AIRL h (on s and s')
};

// GAIL: z = D(x) on the mode's input layout.
// AIRL: z = g(s[,a]) + gamma h(s') - h(s) - log pi(a|s).
class Discriminator {
 public:
  Discriminator(DiscSpec spec, Rng& rng) : spec_(std::move(spec)) {
    const std::size_t d = spec_.obs_dim, k = spec_.space.encoded_width();
    if (spec_.head == HeadKind::gail) {
      std::size_t w = d;
      if (spec_.mode != InputMode::s) w += k;
      if (spec_.mode == InputMode::sas) w += d;
      nets_.emplace_back(mlp_spec(w), rng);
    } else {
      nets_.emplace_back(mlp_spec(spec_.mode == InputMode::s ? d : d + k), rng);
      nets_.emplace_back(mlp_spec(d), rng);
    }
  }

  const DiscSpec& spec() const { return spec_; }
  bool is_airl() const { return spec_.head == HeadKind::airl; }
  std::vector<Mlp>& nets() { return nets_; }
  const std::vector<Mlp>& nets() const { return nets_; }
  Mlp& g() { return nets_.at(0); }
  Mlp& h() { return nets_.at(1); }

  // Full input row layout used by the gradient penalty: [s | a | s'] as
  // applicable to the head and mode.
  Tensor joint_input(const DiscBatch& b) const {
    if (is_airl()) {
      if (spec_.mode == InputMode::s) return detail::hcat({&b.s, &b.s_next});
      return detail::hcat({&b.s, &b.a, &b.s_next});
    }
    switch (spec_.mode) {
      case InputMode::s: return b.s;
      case InputMode::sa: return detail::hcat({&b.s, &b.a});
      case InputMode::sas: return detail::hcat({&b.s, &b.a, &b.s_next});
    }
    return b.s;
  }

  std::size_t joint_width() const {
    const std::size_t d = spec_.obs_dim, k = spec_.space.encoded_width();
    if (is_airl()) return spec_.mode == InputMode::s ? 2 * d : 2 * d + k;
    if (spec_.mode == InputMode::s) return d;
    return spec_.mode == InputMode::sa ? d + k : 2 * d + k;
  }

  // Logits from a joint input (see joint_input) plus log pi for AIRL.
  LogitGraph logits_graph(Tape& tape, Var joint, const Tensor& log_pi) const {
    LogitGraph lg;
    if (!is_airl()) {
      lg.net0.push_back(nets_[0].trace(tape, joint));
      lg.z = lg.net0.back().output;
      return lg;
    }
    if (log_pi.rows() != joint.rows() || log_pi.cols() != 1) {
      throw ContractError("AIRL logits need log pi(a|s) for every row");
    }
    const std::size_t d = spec_.obs_dim;
    const std::size_t g_width = nets_[0].in_width();
    Var s = numcore::slice_cols(joint, 0, d);
    Var g_in = spec_.mode == InputMode::s ? s : numcore::slice_cols(joint, 0, g_width);
    Var s_next = numcore::slice_cols(joint, joint.cols() - d, d);
    lg.net0.push_back(nets_[0].trace(tape, g_in));
    lg.net1.push_back(nets_[1].trace(tape, s));
    lg.net1.push_back(nets_[1].trace(tape, s_next));
    Var f = lg.net0[0].output + spec_.gamma * lg.net1[1].output - lg.net1[0].output;
    lg.z = f - tape.constant(log_pi);
    return lg;
  }

  LogitGraph logits_graph(Tape& tape, const DiscBatch& b) const {
    return logits_graph(tape, tape.constant(joint_input(b)), b.log_pi);
  }

  Tensor logits(const DiscBatch& b) const {
    Tape tape;
    Tensor z = logits_graph(tape, b).z.value();
    return z;
  }

  // AIRL shaped reward term f(s,a,s'), without the policy likelihood.
  Tensor airl_f(const DiscBatch& b) const {
    if (!is_airl()) throw ContractError("airl_f on a GAIL head");
    DiscBatch zero = b;
    zero.log_pi = Tensor::zeros(b.size(), 1);
    return logits(zero);
  }

  // Parameter gradients of the last backward pass, summed over traces of
  // the same network.
  std::vector<std::vector<Tensor>> gradients(const Tape& tape, const LogitGraph& lg) const {
    std::vector<std::vector<Tensor>> out;
    out.push_back(sum_traces(tape, nets_[0], lg.net0));
    if (is_airl()) out.push_back(sum_traces(tape, nets_[1], lg.net1));
    return out;
  }

  // d z / d joint input, n x joint_width (differentiable).
  Var input_gradient(Tape& tape, const LogitGraph& lg) const {
    if (!is_airl()) return nets_[0].input_gradient(tape, lg.net0[0]);
    const std::size_t d = spec_.obs_dim, w = joint_width();
    Var gg = numcore::pad_cols(nets_[0].input_gradient(tape, lg.net0[0]), 0, w);
    Var hs = numcore::pad_cols(nets_[1].input_gradient(tape, lg.net1[0]), 0, w);
    Var hn = numcore::pad_cols(nets_[1].input_gradient(tape, lg.net1[1]), w - d, w);
    return gg - hs + spec_.gamma * hn;
  }

 private:
  MlpSpec mlp_spec(std::size_t in) const {
    MlpSpec s;
    s.widths.push_back(in);
    s.widths.insert(s.widths.end(), spec_.hidden.begin(), spec_.hidden.end());
    s.widths.push_back(1);
    s.hidden = spec_.activation;
    return s;
  }

  static std::vector<Tensor> sum_traces(const Tape& tape, const Mlp& net,
                                        const std::vector<MlpTrace>& traces) {
    std::vector<Tensor> acc = net.gradients(tape, traces.at(0));
    for (std::size_t t = 1; t < traces.size(); ++t) {
      auto g = net.gradients(tape, traces[t]);
      for (std::size_t k = 0; k < acc.size(); ++k) {
        auto dst = acc[k].data();
        auto src = g[k].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
    return acc;
  }

  DiscSpec spec_;
  std::vector<Mlp> nets_;
};

// Mean binary cross-entropy on logits, stable form.
inline double bce_loss(const Tensor& z, const Tensor& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s += y[i] * numcore::detail::stable_softplus(-z[i]) +
         (1.0 - y[i]) * numcore::detail::stable_softplus(z[i]);
  }
  return s / static_cast<double>(z.size());
}

inline Var bce_graph(Var z, const Tensor& y) { return numcore::mean(numcore::bce_with_logits(z, y)); }

// g = mean[(sigmoid(z) - y) z]: derivative of the mean BCE of w * z at w = 1.
inline double irm_gradient(const Tensor& z, const Tensor& y) {
  if (z.size() == 0) throw ContractError("IRM penalty on an empty setting batch");
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (numcore::detail::stable_sigmoid(z[i]) - y[i]) * z[i];
  return s / static_cast<double>(z.size());
}

inline double irm_penalty(const std::vector<Tensor>& z, const std::vector<Tensor>& y) {
  if (z.empty()) throw ContractError("IRM penalty needs at least one setting");
  double p = 0.0;
  for (std::size_t e = 0; e < z.size(); ++e) {
    const double g = irm_gradient(z[e], y[e]);
    p += g * g;
  }
  return p;
}

inline Var irm_penalty_graph(const std::vector<Var>& z, const std::vector<Tensor>& y) {
  if (z.empty()) throw ContractError("IRM penalty needs at least one setting");
  Var total;
  for (std::size_t e = 0; e < z.size(); ++e) {
    if (z[e].rows() == 0) throw ContractError("IRM penalty on an empty setting batch");
    Tape& tape = z[e].tape();
    Var g = numcore::mean((numcore::sigmoid(z[e]) - tape.constant(y[e])) * z[e]);
    Var sq = numcore::square(g);
    total = e == 0 ? sq : total + sq;
  }
  return total;
}

// Mixup points u * x_E + (1 - u) * x_pi, one u per row. Both sides must have
// equal row counts.
inline Tensor mixup(const Tensor& expert, const Tensor& policy, const std::vector<double>& u) {
  if (expert.rows() != policy.rows() || expert.cols() != policy.cols() || u.size() != expert.rows()) {
    throw DimensionError("mixup: mismatched sides " + expert.shape_string() + " and " +
                         policy.shape_string());
  }
  Tensor out(expert.shape());
  for (std::size_t i = 0; i < expert.rows(); ++i) {
    for (std::size_t j = 0; j < expert.cols(); ++j) {
      out(i, j) = u[i] * expert(i, j) + (1.0 - u[i]) * policy(i, j);
    }
  }
  return out;
}

struct GpInputs {
  Tensor x;       // mixed joint inputs
  Tensor log_pi;  // mixed log pi (AIRL), constant w.r.t. x
};

// Equalizes the two sides (subsampling the larger without replacement) and
// draws the mixup points.
inline GpInputs gp_inputs(const Discriminator& d, const DiscBatch& expert, const DiscBatch& policy,
                          Rng& rng) {
  if (expert.size() == 0 || policy.size() == 0) {
    throw ContractError("gradient penalty needs expert and policy rows");
  }
  const std::size_t m = std::min(expert.size(), policy.size());
  auto pick = [&](const DiscBatch& b) {
    std::vector<std::size_t> idx(b.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (b.size() > m) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(m);
      std::sort(idx.begin(), idx.end());
    }
    return take(b, idx);
  };
  const DiscBatch e = pick(expert), p = pick(policy);
  std::vector<double> u(m);
  for (double& v : u) v = uniform01(rng);
  GpInputs out;
  out.x = mixup(d.joint_input(e), d.joint_input(p), u);
  if (d.is_airl()) {
    out.log_pi = Tensor::zeros(m, 1);
    for (std::size_t i = 0; i < m; ++i) out.log_pi[i] = u[i] * e.log_pi[i] + (1 - u[i]) * p.log_pi[i];
  }
  return out;
}

// mean over rows of || d sigmoid(z) / dx ||^2 at the given points.
inline Var gp_penalty_graph(Tape& tape, const Discriminator& d, const GpInputs& in, LogitGraph* keep) {
  Var x = tape.constant(in.x);
  LogitGraph lg = d.logits_graph(tape, x, in.log_pi);
  Var dz = d.input_gradient(tape, lg);
  Var sig = numcore::sigmoid(lg.z);
  Var dsig = sig * (1.0 - sig);
  Var grad = numcore::mul_col(dz, dsig);
  Var pen = numcore::mean(numcore::row_sum(numcore::square(grad)));
  if (keep) *keep = std::move(lg);
  return pen;
}

inline double gp_penalty(const Discriminator& d, const DiscBatch& expert, const DiscBatch& policy,
                         Rng& rng) {
  Tape tape;
  return gp_penalty_graph(tape, d, gp_inputs(d, expert, policy, rng), nullptr).value()[0];
}

enum class RegKind { erm, irm, gp };

inline const char* to_string(RegKind k) {
  switch (k) {
    case RegKind::erm: return "erm";
    case RegKind::irm: return "irm";
    case RegKind::gp: return "gp";
  }
  return "?";
}

inline RegKind reg_from_string(const std::string& s) {
  if (s == "erm") return RegKind::erm;
  if (s == "irm") return RegKind::irm;
  if (s == "gp") return RegKind::gp;
  throw ConfigError("unknown regularizer '" + s + "'");
}

struct RegConfig {
  RegKind kind = RegKind::erm;
  double lambda = 0.0;     // IRM or GP coefficient, by kind
  int n_updates = 5;
  int warmup_rounds = 10;  // linear ramp of lambda over the first rounds

  void validate() const {
    if (n_updates < 1) throw ConfigError("disc.n_updates must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("disc.reg.lambda must be nonnegative");
    if (warmup_rounds < 0) throw ConfigError("disc.reg.warmup_rounds must be nonnegative");
  }

  double effective_lambda(int round) const {
    if (kind == RegKind::erm) return 0.0;
    if (warmup_rounds == 0) return lambda;
    return lambda * std::min(1.0, static_cast<double>(round + 1) / warmup_rounds);
  }
};

struct SettingBatch {
  int setting = 0;
  DiscBatch rows;
  Tensor labels;  // n x 1, 1 = expert
};

struct DiscUpdateResult {
  double loss = 0.0;     // BCE part (pooled, or summed per setting for IRM)
  double penalty = 0.0;  // unweighted IRM or GP penalty
  double total = 0.0;
  double accuracy = 0.0;
};

inline double accuracy(const Tensor& z, const Tensor& y) {
  if (z.size() == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < z.size(); ++i) hit += (z[i] > 0.0) == (y[i] > 0.5);
  return static_cast<double>(hit) / static_cast<double>(z.size());
}

// The training objective on a fixed set of setting batches, recorded on tape.
struct DiscObjective {
  Var total;
  Var bce;
  Var penalty;
  LogitGraph main;
  LogitGraph gp;
  bool has_gp = false;
  Tensor labels;
};

inline DiscObjective disc_objective(Tape& tape, const Discriminator& d,
                                    const std::vector<SettingBatch>& batches, RegKind kind,
                                    double lambda, const GpInputs* gp_in) {
  if (batches.empty()) throw ContractError("discriminator update without setting batches");
  DiscBatch pooled;
  Tensor labels;
  std::vector<std::size_t> offsets = {0};
  for (const auto& b : batches) {
    if (b.rows.size() == 0) throw ContractError("empty setting batch " + std::to_string(b.setting));
    if (b.labels.rows() != b.rows.size()) throw DimensionError("labels do not match rows");
    pooled = concat(pooled, b.rows);
    labels = detail::vcat(labels, b.labels);
    offsets.push_back(offsets.back() + b.rows.size());
  }
  DiscObjective o;
  o.labels = labels;
  o.main = d.logits_graph(tape, pooled);
  if (kind == RegKind::irm) {
    std::vector<Var> zs;
    std::vector<Tensor> ys;
    Var bce_sum;
    for (std::size_t e = 0; e < batches.size(); ++e) {
      Var z = numcore::slice_rows(o.main.z, offsets[e], offsets[e + 1] - offsets[e]);
      Var be = bce_graph(z, batches[e].labels);
      bce_sum = e == 0 ? be : bce_sum + be;
      zs.push_back(z);
      ys.push_back(batches[e].labels);
    }
    o.bce = bce_sum;
    o.penalty = irm_penalty_graph(zs, ys);
    o.total = o.bce + lambda * o.penalty;
  } else {
    o.bce = bce_graph(o.main.z, labels);
    if (kind == RegKind::gp) {
      if (!gp_in) throw ContractError("GP objective without mixup inputs");
      o.penalty = gp_penalty_graph(tape, d, *gp_in, &o.gp);
      o.has_gp = true;
      o.total = o.bce + lambda * o.penalty;
    } else {
      o.penalty = tape.constant(Tensor::zeros(1, 1));
      o.total = o.bce;
    }
  }
  return o;
}

// Per-network optimizer state for a discriminator.
struct DiscOptimizer {
  std::vector<numcore::Adam> adam;
  double max_grad_norm = 10.0;

  DiscOptimizer() = default;
  DiscOptimizer(const Discriminator& d, numcore::AdamConfig cfg, double clip = 10.0)
      : adam(d.nets().size(), numcore::Adam(cfg)), max_grad_norm(clip) {}
};

// reg.n_updates Adam steps on the regularized objective; lambda is the
// coefficient to use this round (already warmed up by the caller).
inline DiscUpdateResult disc_update(Discriminator& d, const std::vector<SettingBatch>& batches,
                                    const RegConfig& reg, double lambda, DiscOptimizer& opt, Rng& rng) {
  reg.validate();
  if (opt.adam.size() != d.nets().size()) throw ContractError("optimizer does not match discriminator");
  std::optional<GpInputs> gp_in;
  if (reg.kind == RegKind::gp) {
    DiscBatch expert, policy;
    for (const auto& b : batches) {
      std::vector<std::size_t> ie, ip;
      for (std::size_t i = 0; i < b.labels.size(); ++i) (b.labels[i] > 0.5 ? ie : ip).push_back(i);
      expert = concat(expert, take(b.rows, ie));
      policy = concat(policy, take(b.rows, ip));
    }
    gp_in = gp_inputs(d, expert, policy, rng);
  }
  DiscUpdateResult res;
  for (int step = 0; step < reg.n_updates; ++step) {
    Tape tape;
    DiscObjective o = disc_objective(tape, d, batches, reg.kind, lambda, gp_in ? &*gp_in : nullptr);
    tape.backward(o.total);
    auto grads = d.gradients(tape, o.main);
    if (o.has_gp) {
      auto extra = d.gradients(tape, o.gp);
      for (std::size_t n = 0; n < grads.size(); ++n) {
        for (std::size_t k = 0; k < grads[n].size(); ++k) {
          auto dst = grads[n][k].data();
          auto src = extra[n][k].data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
    }
    std::vector<Tensor> flat;
    for (auto& g : grads) flat.insert(flat.end(), g.begin(), g.end());
    numcore::clip_global_norm(flat, opt.max_grad_norm);
    std::size_t at = 0;
    for (std::size_t n = 0; n < grads.size(); ++n) {
      std::vector<Tensor> g(flat.begin() + static_cast<std::ptrdiff_t>(at),
                            flat.begin() + static_cast<std::ptrdiff_t>(at + grads[n].size()));
      at += grads[n].size();
      opt.adam[n].step(d.nets()[n], g);
    }
    res.loss = o.bce.value()[0];
    res.penalty = o.penalty.value()[0];
    res.total = o.total.value()[0];
    res.accuracy = accuracy(o.main.z.value(), o.labels);
  }
  return res;
}

inline double reward_from_logit(double z, RewardMode mode) {
  return mode == RewardMode::logit ? z : numcore::detail::stable_softplus(z);
}

inline std::vector<double> rewards_from_disc(const Discriminator& d, const DiscBatch& b, RewardMode mode) {
  const Tensor z = d.logits(b);
  std::vector<double> r(z.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = reward_from_logit(z[i], mode);
  return r;
}

}  // namespace ciail::disc
