#include "refnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "refnet/error.hpp"

namespace refnet {

double grad_check(const LossClosure& loss_fn, ParameterStore& params, double eps) {
  if (!(eps > 0.0) || eps > 1e-2) {
    throw UsageError("grad_check: eps must be in (0, 1e-2], got " + std::to_string(eps));
  }

  const double v1 = loss_fn(nullptr)->values[0];
  const double v2 = loss_fn(nullptr)->values[0];
  if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
    throw UsageError("grad_check: closure is non-deterministic (forward passes disagree)");
  }

  params.zero_grads();
  Tape tape;
  auto loss = loss_fn(&tape);
  backward(tape, loss);

  double worst = 0.0;
  for (const auto& p : params.all()) {
    for (size_t i = 0; i < p.tensor->values.size(); ++i) {
      const double saved = p.tensor->values[i];
      p.tensor->values[i] = saved + eps;
      const double up = loss_fn(nullptr)->values[0];
      p.tensor->values[i] = saved - eps;
      const double down = loss_fn(nullptr)->values[0];
      p.tensor->values[i] = saved;

      const double fd = (up - down) / (2.0 * eps);
      const double ad = p.tensor->grad[i];
      const double denom = std::max({std::fabs(ad), std::fabs(fd), 1e-8});
      worst = std::max(worst, std::fabs(ad - fd) / denom);
    }
  }
  return worst;
}

}  // namespace refnet
