#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/numcore/tensor.hpp"

namespace ciail::numcore {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode differentiation record. Nodes are appended in evaluation
// order, so parents always precede children and a single reverse sweep over
// the node list is a valid topological backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value) { return push_node(std::move(value), true, nullptr); }
  Var constant(Tensor value) { return push_node(std::move(value), false, nullptr); }

  // Records a derived node. The node only tracks gradients when at least
  // one parent does; otherwise the backward closure is discarded.
  Var push(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push_node(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  Var push(Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
    bool needs = false;
    for (const Var& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push_node(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward output w.r.t. v (zeros when unreached).
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
  }

  // Slot a backward closure accumulates into; nullptr when v needs no grad.
  Tensor* grad_slot(Var v) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return &n.grad;
  }

  void accumulate(Var v, const Tensor& g) {
    Tensor* slot = grad_slot(v);
    if (!slot) return;
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  void backward(Var out) {
    if (value(out).size() != 1) {
      throw DimensionError("backward without seed requires a scalar output, got " +
                           value(out).shape_string());
    }
    backward(out, Tensor(value(out).shape(), 1.0));
  }

  void backward(Var out, const Tensor& seed) {
    check_owned(out);
    if (!seed.same_shape(value(out))) {
      throw DimensionError("output_grad shape " + seed.shape_string() +
                           " does not match output " + value(out).shape_string());
    }
    for (auto& n : nodes_) n.grad = Tensor();
    visits_ = 0;
    if (!nodes_[out.id()].requires_grad) return;
    nodes_[out.id()].grad = seed;
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      ++visits_;
      // Closures only touch grad slots of earlier nodes; nodes_ never grows here.
      if (n.backward) n.backward(*this, n.grad);
    }
  }

  // Number of nodes whose gradient was propagated in the last backward pass.
  std::size_t last_backward_visits() const { return visits_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push_node(Tensor value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  void check_owned(Var v) const {
    if (v.valid() && &v.tape() == this && v.id() < nodes_.size()) return;
    throw ContractError("variable does not belong to this tape");
  }

  std::deque<Node> nodes_;  // stable addresses: Var::value() references survive later pushes
  std::size_t visits_ = 0;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

// ---------------------------------------------------------------------------
// Differentiable primitives. All operate on rank-2 values.

namespace detail {

inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
  }
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Elementwise unary op with local derivative df(x).
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tensor y = map(a.value(), f);
  return a.tape().push(std::move(y), {a}, [a, df](Tape& t, const Tensor& g) {
    Tensor* slot = t.grad_slot(a);
    if (!slot) return;
    auto x = t.value(a).data();
    auto dst = slot->data();
    auto gs = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gs[i] * df(x[i]);
  });
}

}  // namespace detail

inline Var add(Var a, Var b) {
  detail::require_same(a.value(), b.value(), "add");
  Tensor y = a.value();
  auto bd = b.value().data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += bd[i];
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  detail::require_same(a.value(), b.value(), "sub");
  Tensor y = a.value();
  auto bd = b.value().data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] -= bd[i];
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (Tensor* slot = t.grad_slot(b)) {
      auto dst = slot->data();
      auto gs = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= gs[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  detail::require_same(a.value(), b.value(), "mul");
  Tensor y = a.value();
  auto bd = b.value().data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] *= bd[i];
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    auto gs = g.data();
    if (Tensor* slot = t.grad_slot(a)) {
      auto other = t.value(b).data();
      auto dst = slot->data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gs[i] * other[i];
    }
    if (Tensor* slot = t.grad_slot(b)) {
      auto other = t.value(a).data();
      auto dst = slot->data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gs[i] * other[i];
    }
  });
}

inline Var scale(Var a, double c) {
  Tensor y = detail::map(a.value(), [c](double x) { return c * x; });
  return a.tape().push(std::move(y), {a}, [a, c](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      auto dst = slot->data();
      auto gs = g.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * gs[i];
    }
  });
}

inline Var add_scalar(Var a, double c) {
  Tensor y = detail::map(a.value(), [c](double x) { return x + c; });
  return a.tape().push(std::move(y), {a}, [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

inline Var neg(Var a) { return scale(a, -1.0); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator+(Var a, double c) { return add_scalar(a, c); }
inline Var operator-(Var a, double c) { return add_scalar(a, -c); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator-(double c, Var a) { return add_scalar(neg(a), c); }
inline Var operator+(double c, Var a) { return add_scalar(a, c); }

// (n x k)(k x m)
inline Var matmul(Var a, Var b) {
  Tensor y = matmul(a.value(), b.value());
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, matmul_bt(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, matmul_at(t.value(a), g));
  });
}

// a * b^T
inline Var matmul_bt(Var a, Var b) {
  Tensor y = matmul_bt(a.value(), b.value());
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.accumulate(a, matmul(g, t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, matmul_at(g, t.value(a)));
  });
}

// Adds a 1 x m row to every row of a.
inline Var add_row(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_row: bias " + bv.shape_string() + " for " + av.shape_string());
  }
  Tensor y = av;
  const std::size_t m = av.cols();
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) y(i, j) += bv[j];
  }
  return a.tape().push(std::move(y), {a, bias}, [a, bias, m](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (Tensor* slot = t.grad_slot(bias)) {
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < m; ++j) (*slot)[j] += g(i, j);
      }
    }
  });
}

// Scales row i of a (n x m) by c(i, 0).
inline Var mul_col(Var a, Var c) {
  const Tensor& av = a.value();
  const Tensor& cv = c.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("mul_col: " + cv.shape_string() + " for " + av.shape_string());
  }
  Tensor y = av;
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) y(i, j) *= cv[i];
  }
  return a.tape().push(std::move(y), {a, c}, [a, c](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& cv = t.value(c);
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t j = 0; j < av.cols(); ++j) (*slot)(i, j) += g(i, j) * cv[i];
      }
    }
    if (Tensor* slot = t.grad_slot(c)) {
      for (std::size_t i = 0; i < av.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) acc += g(i, j) * av(i, j);
        (*slot)[i] += acc;
      }
    }
  });
}

inline Var tanh(Var a) {
  Tape& tape = a.tape();
  const Var out(&tape, tape.size());  // the node pushed below
  Tensor y = detail::map(a.value(), [](double x) { return std::tanh(x); });
  return tape.push(std::move(y), {a}, [a, out](Tape& t, const Tensor& g) {
    Tensor* slot = t.grad_slot(a);
    if (!slot) return;
    auto y = t.value(out).data();
    auto dst = slot->data();
    auto gs = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += gs[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var relu(Var a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var sigmoid(Var a) {
  return detail::unary(a, detail::stable_sigmoid, [](double x) {
    const double s = detail::stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

inline Var softplus(Var a) {
  return detail::unary(a, detail::stable_softplus, detail::stable_sigmoid);
}

inline Var exp(Var a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline Var log(Var a) {
  return detail::unary(
      a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

inline Var square(Var a) {
  return detail::unary(
      a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

// Gradient passes only where lo < x < hi.
inline Var clamp(Var a, double lo, double hi) {
  return detail::unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// Elementwise minimum; ties route the gradient to a.
inline Var minimum(Var a, Var b) {
  detail::require_same(a.value(), b.value(), "minimum");
  Tensor y = a.value();
  auto bd = b.value().data();
  auto yd = y.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = std::min(yd[i], bd[i]);
  return a.tape().push(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    auto av = t.value(a).data();
    auto bv = t.value(b).data();
    auto gs = g.data();
    Tensor* sa = t.grad_slot(a);
    Tensor* sb = t.grad_slot(b);
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (av[i] <= bv[i]) {
        if (sa) (*sa)[i] += gs[i];
      } else if (sb) {
        (*sb)[i] += gs[i];
      }
    }
  });
}

inline Var sum(Var a) {
  Tensor y = Tensor::filled(1, 1, a.value().sum());
  return a.tape().push(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (double& v : slot->data()) v += g[0];
    }
  });
}

inline Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

// n x m -> n x 1
inline Var row_sum(Var a) {
  const Tensor& av = a.value();
  Tensor y = Tensor::zeros(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) acc += av(i, j);
    y[i] = acc;
  }
  return a.tape().push(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t i = 0; i < slot->rows(); ++i) {
        for (std::size_t j = 0; j < slot->cols(); ++j) (*slot)(i, j) += g[i];
      }
    }
  });
}

namespace detail {

inline Tensor log_softmax_rows(const Tensor& av) {
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto row = av.row_span(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < row.size(); ++j) y(i, j) = row[j] - lse;
  }
  return y;
}

}  // namespace detail

// Row-wise log-softmax.
inline Var log_softmax(Var a) {
  return a.tape().push(detail::log_softmax_rows(a.value()), {a}, [a](Tape& t, const Tensor& g) {
    Tensor* slot = t.grad_slot(a);
    if (!slot) return;
    const Tensor ls = detail::log_softmax_rows(t.value(a));
    for (std::size_t i = 0; i < ls.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < ls.cols(); ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < ls.cols(); ++j) {
        (*slot)(i, j) += g(i, j) - std::exp(ls(i, j)) * gsum;
      }
    }
  });
}

// Picks column index[i] from row i: n x m -> n x 1.
inline Var gather(Var a, const std::vector<std::size_t>& index) {
  const Tensor& av = a.value();
  if (index.size() != av.rows()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for " +
                         av.shape_string());
  }
  Tensor y = Tensor::zeros(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    if (index[i] >= av.cols()) throw DimensionError("gather: index out of range");
    y[i] = av(i, index[i]);
  }
  return a.tape().push(std::move(y), {a}, [a, index](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t i = 0; i < index.size(); ++i) (*slot)(i, index[i]) += g[i];
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.rows() != n) throw DimensionError("concat_cols: row count mismatch");
    total += p.cols();
  }
  Tensor y = Tensor::zeros(n, total);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < pv.cols(); ++j) y(i, off + j) = pv(i, j);
    }
    off += pv.cols();
  }
  Tape& tape = parts.front().tape();
  return tape.push(std::move(y), parts, [parts](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t w = t.value(p).cols();
      if (Tensor* slot = t.grad_slot(p)) {
        for (std::size_t i = 0; i < slot->rows(); ++i) {
          for (std::size_t j = 0; j < w; ++j) (*slot)(i, j) += g(i, off + j);
        }
      }
      off += w;
    }
  });
}

inline Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Tensor& av = a.value();
  if (start + count > av.cols()) throw DimensionError("slice_cols out of range");
  Tensor y = Tensor::zeros(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) y(i, j) = av(i, start + j);
  }
  return a.tape().push(std::move(y), {a}, [a, start, count](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t i = 0; i < slot->rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) (*slot)(i, start + j) += g(i, j);
      }
    }
  });
}

inline Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Tensor& av = a.value();
  if (start + count > av.rows()) throw DimensionError("slice_rows out of range");
  const std::size_t m = av.cols();
  Tensor y = Tensor::zeros(count, m);
  std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(start * m), count * m,
              y.data().begin());
  return a.tape().push(std::move(y), {a}, [a, start, count, m](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t k = 0; k < count * m; ++k) (*slot)[start * m + k] += g[k];
    }
  });
}

// Embeds a (n x w) at column offset inside an n x total zero matrix.
inline Var pad_cols(Var a, std::size_t offset, std::size_t total) {
  const Tensor& av = a.value();
  if (offset + av.cols() > total) throw DimensionError("pad_cols out of range");
  Tensor y = Tensor::zeros(av.rows(), total);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) y(i, offset + j) = av(i, j);
  }
  const std::size_t w = av.cols();
  return a.tape().push(std::move(y), {a}, [a, offset, w](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(a)) {
      for (std::size_t i = 0; i < slot->rows(); ++i) {
        for (std::size_t j = 0; j < w; ++j) (*slot)(i, j) += g(i, offset + j);
      }
    }
  });
}

// Elementwise -[y log s(z) + (1-y) log(1-s(z))] in the overflow-free form
// y softplus(-z) + (1-y) softplus(z). Returns n x 1.
inline Var bce_with_logits(Var z, const Tensor& labels) {
  const Tensor& zv = z.value();
  if (labels.size() != zv.size()) throw DimensionError("bce_with_logits: label count mismatch");
  Tensor y(zv.shape());
  for (std::size_t i = 0; i < zv.size(); ++i) {
    const double l = labels[i];
    y[i] = l * detail::stable_softplus(-zv[i]) + (1.0 - l) * detail::stable_softplus(zv[i]);
  }
  return z.tape().push(std::move(y), {z}, [z, labels](Tape& t, const Tensor& g) {
    if (Tensor* slot = t.grad_slot(z)) {
      const Tensor& zv = t.value(z);
      for (std::size_t i = 0; i < zv.size(); ++i) {
        (*slot)[i] += g[i] * (detail::stable_sigmoid(zv[i]) - labels[i]);
      }
    }
  });
}

inline Var detach(Var a) { return a.tape().constant(a.value()); }

// 1 where a > 0, else 0; a constant (the derivative of a step is zero a.e.).
inline Var step_mask(Var a) {
  return a.tape().constant(detail::map(a.value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; }));
}

}  // namespace ciail::numcore
