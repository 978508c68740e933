#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "infofair/tensor.hpp"

namespace infofair {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Moments for one parameter group. `t` counts completed steps.
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;

  static AdamState for_params(const std::vector<Tensor>& params, AdamOptions options) {
    AdamState s;
    s.options = options;
    for (const auto& p : params) {
      s.m.emplace_back(p.size(), 0.0);
      s.v.emplace_back(p.size(), 0.0);
    }
    return s;
  }
};

/// One Adam update with decoupled weight decay: every parameter first shrinks
/// by lr * weight_decay * param, then takes the bias-corrected Adam step. A
/// parameter without a gradient is treated as having a zero gradient.
inline void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) +
                         " parameters for state of " + std::to_string(state.m.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != state.m[k].size() ||
        (params[k].has_grad() && params[k].grad().size() != params[k].size())) {
      throw DimensionError("adam_step: parameter " + std::to_string(k) +
                           " does not match its optimizer state");
    }
  }

  const auto& o = state.options;
  state.t += 1;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].mutable_values();
    const auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      p[i] -= o.learning_rate * o.weight_decay * p[i];
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * gi;
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= o.learning_rate * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

}  // namespace infofair
