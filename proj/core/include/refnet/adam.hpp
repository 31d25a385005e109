#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "refnet/param.hpp"

namespace refnet {

// Adam moments keyed by parameter name. Moments are created lazily on the
// first step and always match the parameter shapes.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::unordered_map<std::string, std::vector<double>> m;
  std::unordered_map<std::string, std::vector<double>> v;
};

// Standard Adam update with bias correction, applied in place. Every
// parameter must have a populated gradient buffer (zero counts), otherwise
// UsageError.
void adam_step(ParameterStore& params, AdamState& state, double lr);

}  // namespace refnet
