#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "refnet/tensor.hpp"

namespace refnet {

enum class Init { Zeros, UniformFanIn, Constant };

struct InitSpec {
  Init kind = Init::Zeros;
  double value = 0.0;  // used by Constant
};

struct Parameter {
  std::string name;
  TensorPtr tensor;
  InitSpec init;
};

// Owns every trainable tensor of a model, in creation order. Creation order
// is the serialization and update order, which keeps runs deterministic.
class ParameterStore {
 public:
  // UniformFanIn draws from [-1/sqrt(fan_in), 1/sqrt(fan_in)] where fan_in is
  // the last dimension. Throws UsageError on duplicate names.
  TensorPtr create(const std::string& name, std::vector<int> shape, InitSpec spec,
                   std::mt19937_64& rng);
  TensorPtr get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<Parameter>& all() const { return params_; }
  void zero_grads();
  size_t entry_count() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

// Deterministic uniform double in [lo, hi) driven by the raw engine output,
// so results do not depend on the standard library's distribution details.
double uniform_real(std::mt19937_64& rng, double lo, double hi);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(ParameterStore& params, double max_norm);

}  // namespace refnet
