#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ciail/errors.hpp"

namespace ciail::numcore {

// Central-difference gradient estimate (f(p+h e_i) - f(p-h e_i)) / 2h.
inline std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                            std::span<const double> params, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_grad: step h must be positive");
  std::vector<double> p(params.begin(), params.end());
  std::vector<double> grad(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// |a - b| <= max(rel * max(|a|, |b|), abs)
inline bool grad_close(double a, double b, double rel, double abs) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return std::abs(a - b) <= std::max(rel * scale, abs);
}

}  // namespace ciail::numcore
