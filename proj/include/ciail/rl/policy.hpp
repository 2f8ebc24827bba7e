#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "ciail/envs/nav_env.hpp"
#include "ciail/errors.hpp"
#include "ciail/numcore.hpp"

namespace ciail::rl {

using numcore::Mlp;
using numcore::MlpSpec;
using numcore::MlpTrace;
using numcore::Tape;
using numcore::Tensor;
using numcore::Var;

struct PolicySample {
  envs::Action action;
  double log_prob = 0.0;
};

// Differentiable view of a policy on a batch: per-row log pi(a|s) and entropy
// (exact for categorical, -log pi(a|s) single-sample estimate for Gaussian).
struct PolicyGraph {
  Var log_prob;  // n x 1
  Var entropy;   // n x 1
  MlpTrace trace;
};

// Actions in batch form: n x 1 indices for discrete, n x 2 for continuous.
inline std::vector<double> action_row(const envs::Action& a) {
  if (const int* i = std::get_if<int>(&a)) return {static_cast<double>(*i)};
  const auto& v = std::get<envs::Vec2>(a);
  return {v[0], v[1]};
}

inline envs::Action action_from_row(std::span<const double> row, bool discrete) {
  if (discrete) return envs::Action{static_cast<int>(std::lround(row[0]))};
  return envs::Action{envs::Vec2{row[0], row[1]}};
}

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::unique_ptr<Policy> clone() const = 0;
  virtual bool discrete() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual std::size_t action_width() const = 0;  // columns of an action batch

  virtual const Mlp& net() const = 0;
  virtual Mlp& net() = 0;

  virtual PolicySample sample(std::span<const double> obs, Rng& rng) const = 0;
  // argmax action (categorical) or squashed mean (Gaussian)
  virtual envs::Action greedy(std::span<const double> obs) const = 0;
  virtual double log_prob_of(std::span<const double> obs, const envs::Action& a) const = 0;
  virtual Tensor log_probs(const Tensor& obs, const Tensor& actions) const = 0;
  virtual double entropy(std::span<const double> obs, Rng& rng) const = 0;
  virtual PolicyGraph graph(Tape& tape, const Tensor& obs, const Tensor& actions) const = 0;
};

namespace detail {
inline void check_finite(const Tensor& t, const char* what) {
  if (!t.all_finite()) throw DivergenceError("policy", std::string("non-finite ") + what);
}
}  // namespace detail

// Softmax policy over a discrete action set.
class CategoricalPolicy final : public Policy {
 public:
  CategoricalPolicy(std::size_t obs_dim, int n_actions, std::vector<std::size_t> hidden,
                    numcore::Activation act, Rng& rng) {
    MlpSpec spec;
    spec.widths.push_back(obs_dim);
    spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
    spec.widths.push_back(static_cast<std::size_t>(n_actions));
    spec.hidden = act;
    net_ = Mlp(spec, rng);
  }
  explicit CategoricalPolicy(Mlp net) : net_(std::move(net)) {}

  std::unique_ptr<Policy> clone() const override { return std::make_unique<CategoricalPolicy>(*this); }
  bool discrete() const override { return true; }
  std::size_t obs_dim() const override { return net_.in_width(); }
  std::size_t action_width() const override { return 1; }
  std::size_t n_actions() const { return net_.out_width(); }
  const Mlp& net() const override { return net_; }
  Mlp& net() override { return net_; }

  Tensor logits(const Tensor& obs) const {
    Tensor l = net_.predict(obs);
    detail::check_finite(l, "logits");
    return l;
  }

  // Row-wise probabilities, n x A.
  Tensor probabilities(const Tensor& obs) const {
    Tensor p = numcore::detail::log_softmax_rows(logits(obs));
    for (double& v : p.data()) v = std::exp(v);
    return p;
  }

  PolicySample sample(std::span<const double> obs, Rng& rng) const override {
    const Tensor lp = numcore::detail::log_softmax_rows(logits(Tensor::row(obs)));
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < lp.cols(); ++k) {
      acc += std::exp(lp[k]);
      if (u < acc) break;
    }
    return {envs::Action{static_cast<int>(k)}, lp[k]};
  }

  envs::Action greedy(std::span<const double> obs) const override {
    const Tensor l = logits(Tensor::row(obs));
    auto d = l.data();
    return envs::Action{static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin())};
  }

  double log_prob_of(std::span<const double> obs, const envs::Action& a) const override {
    const Tensor lp = numcore::detail::log_softmax_rows(logits(Tensor::row(obs)));
    return lp[static_cast<std::size_t>(std::get<int>(a))];
  }

  Tensor log_probs(const Tensor& obs, const Tensor& actions) const override {
    const Tensor lp = numcore::detail::log_softmax_rows(logits(obs));
    Tensor out = Tensor::zeros(obs.rows(), 1);
    for (std::size_t i = 0; i < obs.rows(); ++i) {
      out[i] = lp(i, static_cast<std::size_t>(actions(i, 0)));
    }
    return out;
  }

  double entropy(std::span<const double> obs, Rng&) const override {
    const Tensor lp = numcore::detail::log_softmax_rows(logits(Tensor::row(obs)));
    double h = 0.0;
    for (double v : lp.data()) h -= std::exp(v) * v;
    return h;
  }

  PolicyGraph graph(Tape& tape, const Tensor& obs, const Tensor& actions) const override {
    PolicyGraph g;
    g.trace = net_.trace(tape, tape.constant(obs));
    detail::check_finite(g.trace.output.value(), "logits");
    Var lp = numcore::log_softmax(g.trace.output);
    std::vector<std::size_t> idx(actions.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::size_t>(actions(i, 0));
    g.log_prob = numcore::gather(lp, idx);
    g.entropy = -numcore::row_sum(numcore::exp(lp) * lp);
    return g;
  }

  // Full log-softmax graph, n x A (used by discrete SAC).
  std::pair<Var, MlpTrace> log_softmax_graph(Tape& tape, const Tensor& obs) const {
    MlpTrace tr = net_.trace(tape, tape.constant(obs));
    detail::check_finite(tr.output.value(), "logits");
    return {numcore::log_softmax(tr.output), tr};
  }

 private:
  Mlp net_;
};

// tanh-squashed diagonal Gaussian; the network emits (mean, log_std).
class GaussianPolicy final : public Policy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;
  static constexpr double kSquashEps = 1e-6;

  GaussianPolicy(std::size_t obs_dim, std::size_t action_dim, std::vector<std::size_t> hidden,
                 numcore::Activation act, Rng& rng)
      : dim_(action_dim) {
    MlpSpec spec;
    spec.widths.push_back(obs_dim);
    spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
    spec.widths.push_back(2 * action_dim);
    spec.hidden = act;
    net_ = Mlp(spec, rng);
  }
  GaussianPolicy(Mlp net, std::size_t action_dim) : net_(std::move(net)), dim_(action_dim) {}

  std::unique_ptr<Policy> clone() const override { return std::make_unique<GaussianPolicy>(*this); }
  bool discrete() const override { return false; }
  std::size_t obs_dim() const override { return net_.in_width(); }
  std::size_t action_width() const override { return dim_; }
  const Mlp& net() const override { return net_; }
  Mlp& net() override { return net_; }

  // Row-wise (mean, clamped log_std).
  std::pair<Tensor, Tensor> moments(const Tensor& obs) const {
    const Tensor out = net_.predict(obs);
    detail::check_finite(out, "policy outputs");
    Tensor mean = Tensor::zeros(obs.rows(), dim_), log_std = Tensor::zeros(obs.rows(), dim_);
    for (std::size_t i = 0; i < obs.rows(); ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        mean(i, j) = out(i, j);
        log_std(i, j) = std::clamp(out(i, dim_ + j), kLogStdMin, kLogStdMax);
      }
    }
    return {mean, log_std};
  }

  PolicySample sample(std::span<const double> obs, Rng& rng) const override {
    auto [mean, log_std] = moments(Tensor::row(obs));
    envs::Vec2 a{0.0, 0.0};
    for (std::size_t j = 0; j < dim_ && j < 2; ++j) {
      a[j] = std::tanh(mean[j] + std::exp(log_std[j]) * normal(rng, 0.0, 1.0));
    }
    envs::Action act{a};
    return {act, log_prob_of(obs, act)};
  }

  envs::Action greedy(std::span<const double> obs) const override {
    auto [mean, log_std] = moments(Tensor::row(obs));
    return envs::Action{envs::Vec2{std::tanh(mean[0]), dim_ > 1 ? std::tanh(mean[1]) : 0.0}};
  }

  double log_prob_of(std::span<const double> obs, const envs::Action& a) const override {
    const auto row = action_row(a);
    return log_probs(Tensor::row(obs), Tensor::row(row))[0];
  }

  Tensor log_probs(const Tensor& obs, const Tensor& actions) const override {
    auto [mean, log_std] = moments(obs);
    Tensor out = Tensor::zeros(obs.rows(), 1);
    for (std::size_t i = 0; i < obs.rows(); ++i) {
      double lp = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double a = squash_clip(actions(i, j));
        const double u = std::atanh(a);
        const double z = (u - mean(i, j)) * std::exp(-log_std(i, j));
        lp += -0.5 * z * z - log_std(i, j) - kHalfLog2Pi - std::log(1.0 - a * a + kSquashEps);
      }
      out[i] = lp;
    }
    return out;
  }

  double entropy(std::span<const double> obs, Rng& rng) const override {
    return -sample(obs, rng).log_prob;
  }

  PolicyGraph graph(Tape& tape, const Tensor& obs, const Tensor& actions) const override {
    PolicyGraph g;
    g.trace = net_.trace(tape, tape.constant(obs));
    detail::check_finite(g.trace.output.value(), "policy outputs");
    Var mean = numcore::slice_cols(g.trace.output, 0, dim_);
    Var log_std = numcore::clamp(numcore::slice_cols(g.trace.output, dim_, dim_), kLogStdMin, kLogStdMax);
    Tensor u = Tensor::zeros(obs.rows(), dim_);
    Tensor jac = Tensor::zeros(obs.rows(), 1);
    for (std::size_t i = 0; i < obs.rows(); ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        const double a = squash_clip(actions(i, j));
        u(i, j) = std::atanh(a);
        jac[i] += std::log(1.0 - a * a + kSquashEps) + kHalfLog2Pi;
      }
    }
    Var z = (tape.constant(u) - mean) * numcore::exp(-log_std);
    Var per_dim = -0.5 * numcore::square(z) - log_std;
    g.log_prob = numcore::row_sum(per_dim) - tape.constant(jac);
    g.entropy = -g.log_prob;
    return g;
  }

  // Reparameterized sample a = tanh(mean + std * eps) with its log-density.
  struct Reparam {
    Var action;    // n x dim
    Var log_prob;  // n x 1
    MlpTrace trace;
  };

  Reparam rsample(Tape& tape, const Tensor& obs, const Tensor& eps) const {
    Reparam r;
    r.trace = net_.trace(tape, tape.constant(obs));
    detail::check_finite(r.trace.output.value(), "policy outputs");
    Var mean = numcore::slice_cols(r.trace.output, 0, dim_);
    Var log_std = numcore::clamp(numcore::slice_cols(r.trace.output, dim_, dim_), kLogStdMin, kLogStdMax);
    Var e = tape.constant(eps);
    Var u = mean + numcore::exp(log_std) * e;
    r.action = numcore::tanh(u);
    Var gauss = -0.5 * numcore::square(e) - log_std - kHalfLog2Pi;
    Var squash = numcore::log(1.0 + kSquashEps - numcore::square(r.action));
    r.log_prob = numcore::row_sum(gauss - squash);
    return r;
  }

 private:
  static constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

  static double squash_clip(double a) { return std::clamp(a, -1.0 + 1e-9, 1.0 - 1e-9); }

  Mlp net_;
  std::size_t dim_ = 2;
};

inline std::unique_ptr<Policy> make_policy(std::size_t obs_dim, const envs::ActionSpace& space,
                                           const std::vector<std::size_t>& hidden,
                                           numcore::Activation act, Rng& rng) {
  if (space.discrete) return std::make_unique<CategoricalPolicy>(obs_dim, space.n, hidden, act, rng);
  return std::make_unique<GaussianPolicy>(obs_dim, static_cast<std::size_t>(space.n), hidden, act, rng);
}

}  // namespace ciail::rl
