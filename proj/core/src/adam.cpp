#include "refnet/adam.hpp"

#include <cmath>

#include "refnet/error.hpp"

namespace refnet {

void adam_step(ParameterStore& params, AdamState& state, double lr) {
  for (const auto& p : params.all()) {
    if (p.tensor->grad.size() != p.tensor->values.size()) {
      throw UsageError("adam_step: missing gradient for parameter " + p.name);
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& p : params.all()) {
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.empty()) m.assign(p.tensor->values.size(), 0.0);
    if (v.empty()) v.assign(p.tensor->values.size(), 0.0);
    for (size_t i = 0; i < p.tensor->values.size(); ++i) {
      const double g = p.tensor->grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.tensor->values[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace refnet
