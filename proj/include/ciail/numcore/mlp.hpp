#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore/rng.hpp"
#include "ciail/numcore/tape.hpp"
#include "ciail/numcore/tensor.hpp"

namespace ciail::numcore {

enum class Activation { identity, tanh, relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "?";
}

// widths = {input, hidden..., output}; one dense layer per consecutive pair.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;
};

// Binding between one recorded forward pass and the network that produced it.
struct MlpTrace {
  Var input;
  Var output;
  std::vector<Var> params;  // weight0, bias0, weight1, bias1, ...
  std::vector<Var> pre;     // pre-activation per layer
  std::uint64_t version = 0;
};

namespace detail {
inline std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::identity: return x;
  }
  return x;
}

inline Var activate(Activation a, Var x) {
  switch (a) {
    case Activation::tanh: return tanh(x);
    case Activation::relu: return relu(x);
    case Activation::identity: return x;
  }
  return x;
}
}  // namespace detail

class Mlp {
 public:
  Mlp() = default;

  // Weights ~ U(-sqrt(6/(fan_in+fan_out)), +sqrt(...)), biases zero.
  Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    validate();
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
      const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      Tensor w = Tensor::zeros(in, out);
      for (double& v : w.data()) v = uniform(rng, -limit, limit);
      params_.push_back(std::move(w));
      params_.push_back(Tensor::zeros(1, out));
      names_.push_back("l" + std::to_string(l) + ".weight");
      names_.push_back("l" + std::to_string(l) + ".bias");
    }
    version_ = detail::next_version();
  }

  static Mlp zeros(MlpSpec spec) {
    Rng rng(0);
    Mlp m(std::move(spec), rng);
    for (auto& p : m.params_) p.fill(0.0);
    return m;
  }

  const MlpSpec& spec() const { return spec_; }
  std::size_t in_width() const { return spec_.widths.front(); }
  std::size_t out_width() const { return spec_.widths.back(); }
  std::size_t n_layers() const { return spec_.widths.size() - 1; }

  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }

  // Any mutable access invalidates tapes recorded against earlier values.
  std::vector<Tensor>& mutable_params() {
    version_ = detail::next_version();
    return params_;
  }
  std::uint64_t version() const { return version_; }

  const Tensor& weight(std::size_t layer) const { return params_.at(2 * layer); }
  const Tensor& bias(std::size_t layer) const { return params_.at(2 * layer + 1); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  // Tape-free evaluation.
  Tensor predict(const Tensor& x) const {
    check_input(x);
    Tensor h = x;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Tensor z = matmul(h, weight(l));
      const Tensor& b = bias(l);
      const Activation act = l + 1 == n_layers() ? spec_.output : spec_.hidden;
      const std::size_t m = z.cols();
      for (std::size_t i = 0; i < z.rows(); ++i) {
        for (std::size_t j = 0; j < m; ++j) z(i, j) = detail::activate(act, z(i, j) + b[j]);
      }
      h = std::move(z);
    }
    return h;
  }

  // Records a forward pass of x on the tape; parameters enter as leaves.
  MlpTrace trace(Tape& tape, Var x) const {
    check_input(x.value());
    MlpTrace tr;
    tr.input = x;
    tr.version = version_;
    for (const auto& p : params_) tr.params.push_back(tape.leaf(p));
    Var h = x;
    for (std::size_t l = 0; l < n_layers(); ++l) {
      Var z = add_row(matmul(h, tr.params[2 * l]), tr.params[2 * l + 1]);
      tr.pre.push_back(z);
      h = detail::activate(l + 1 == n_layers() ? spec_.output : spec_.hidden, z);
    }
    tr.output = h;
    return tr;
  }

  // Parameter gradients from the last backward pass on the trace's tape.
  std::vector<Tensor> gradients(const Tape& tape, const MlpTrace& tr) const {
    if (tr.version != version_) {
      throw StaleTapeError("tape recorded against parameters that have since been modified");
    }
    std::vector<Tensor> out;
    out.reserve(tr.params.size());
    for (const Var& p : tr.params) out.push_back(tape.grad(p));
    return out;
  }

  // Differentiable d(sum of outputs)/d(input) for each row: n x in_width.
  // Built from primitive ops, so it can itself be differentiated w.r.t. the
  // parameters (needed by input-gradient penalties).
  Var input_gradient(Tape& tape, const MlpTrace& tr) const {
    const std::size_t n = tr.output.rows();
    Var g = tape.constant(Tensor::filled(n, out_width(), 1.0));
    for (std::size_t l = n_layers(); l-- > 0;) {
      if (l + 1 == n_layers()) {
        g = mul(g, activation_derivative(spec_.output, tr.pre[l]));
      }
      g = matmul_bt(g, tr.params[2 * l]);
      if (l > 0) g = mul(g, activation_derivative(spec_.hidden, tr.pre[l - 1]));
    }
    return g;
  }

  // this <- tau * src + (1 - tau) * this
  void polyak_from(const Mlp& src, double tau) {
    auto& dst = mutable_params();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      auto d = dst[k].data();
      auto s = src.params_[k].data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = tau * s[i] + (1.0 - tau) * d[i];
    }
  }

 private:
  static Var activation_derivative(Activation a, Var pre) {
    switch (a) {
      case Activation::tanh: return 1.0 - square(tanh(pre));
      case Activation::relu: return step_mask(pre);
      case Activation::identity:
        return pre.tape().constant(Tensor(pre.value().shape(), 1.0));
    }
    return pre;
  }

  void validate() const {
    if (spec_.widths.size() < 2) throw DimensionError("MLP needs at least one layer");
    for (std::size_t w : spec_.widths) {
      if (w == 0) throw DimensionError("MLP layer widths must be positive");
    }
  }

  void check_input(const Tensor& x) const {
    if (x.rows() < 1) throw DimensionError("layer 0: input has no rows");
    if (x.cols() != in_width()) {
      throw DimensionError("layer 0: expected input width " + std::to_string(in_width()) +
                           ", got " + std::to_string(x.cols()));
    }
  }

  MlpSpec spec_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
  std::uint64_t version_ = 0;
};

// ---------------------------------------------------------------------------
// One-shot forward/backward over a fresh tape.

struct ForwardPass {
  Tensor y;
  std::unique_ptr<Tape> tape;
  MlpTrace trace;
};

struct Gradients {
  std::vector<Tensor> params;
  Tensor input;
};

inline ForwardPass forward(const Mlp& mlp, const Tensor& x) {
  ForwardPass fp;
  fp.tape = std::make_unique<Tape>();
  fp.trace = mlp.trace(*fp.tape, fp.tape->leaf(x));
  fp.y = fp.trace.output.value();
  return fp;
}

inline Gradients backward(const Mlp& mlp, ForwardPass& fp, const Tensor& output_grad) {
  if (fp.trace.version != mlp.version()) {
    throw StaleTapeError("tape recorded against parameters that have since been modified");
  }
  fp.tape->backward(fp.trace.output, output_grad);
  return Gradients{mlp.gradients(*fp.tape, fp.trace), fp.tape->grad(fp.trace.input)};
}

}  // namespace ciail::numcore
