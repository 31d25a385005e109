#include "refnet/param.hpp"

#include <cmath>

#include "refnet/error.hpp"

namespace refnet {

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  // 53-bit mantissa trick: exact, portable across standard libraries.
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

TensorPtr ParameterStore::create(const std::string& name, std::vector<int> shape, InitSpec spec,
                                 std::mt19937_64& rng) {
  if (index_.count(name)) throw UsageError("ParameterStore: duplicate parameter name " + name);
  auto t = make_tensor(std::move(shape));
  t->requires_grad = true;
  switch (spec.kind) {
    case Init::Zeros:
      break;
    case Init::Constant:
      for (double& v : t->values) v = spec.value;
      break;
    case Init::UniformFanIn: {
      const double fan_in = static_cast<double>(t->shape.back());
      const double bound = 1.0 / std::sqrt(fan_in);
      for (double& v : t->values) v = uniform_real(rng, -bound, bound);
      break;
    }
  }
  index_[name] = params_.size();
  params_.push_back({name, t, spec});
  return t;
}

TensorPtr ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("ParameterStore: unknown parameter " + name);
  return params_[it->second].tensor;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) {
    p.tensor->ensure_grad();
    p.tensor->zero_grad();
  }
}

size_t ParameterStore::entry_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.tensor->values.size();
  return n;
}

double clip_global_norm(ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.all()) {
    for (double g : p.tensor->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (const auto& p : params.all()) {
      for (double& g : p.tensor->grad) g *= s;
    }
  }
  return norm;
}

}  // namespace refnet
