#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore/mlp.hpp"
#include "ciail/numcore/tensor.hpp"

namespace ciail::numcore {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Rescales grads in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
inline double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      for (double& v : g.data()) v *= s;
    }
  }
  return norm;
}

// Adam with bias correction. Moment buffers are created lazily on the first
// step so they mirror whatever parameter list is passed in.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  void step(std::vector<Tensor>& params, std::span<const Tensor> grads,
            std::span<const std::string> names) {
    if (grads.size() != params.size()) {
      throw DimensionError("adam: " + std::to_string(grads.size()) + " gradients for " +
                           std::to_string(params.size()) + " parameters");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!grads[k].same_shape(params[k])) {
        throw DimensionError("adam: gradient shape " + grads[k].shape_string() +
                             " for parameter " + label(names, k) + " " +
                             params[k].shape_string());
      }
      if (!grads[k].all_finite()) throw DivergenceError(label(names, k), "non-finite gradient");
    }
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
      }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto p = params[k].data();
      auto g = grads[k].data();
      auto m = m_[k].data();
      auto v = v_[k].data();
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void step(Mlp& mlp, std::span<const Tensor> grads) {
    // Read names before mutable access so the span stays valid.
    const auto names = mlp.param_names();
    step(mlp.mutable_params(), grads, names);
  }

 private:
  static std::string label(std::span<const std::string> names, std::size_t k) {
    return k < names.size() ? names[k] : "param" + std::to_string(k);
  }

  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace ciail::numcore
