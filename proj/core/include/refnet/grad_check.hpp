#pragma once

#include <functional>

#include "refnet/param.hpp"
#include "refnet/tape.hpp"

namespace refnet {

// Builds a scalar loss. Called with a tape for the autodiff pass and with
// nullptr for the (many) value-only finite-difference evaluations, so the
// closure must be deterministic and must not mutate state.
using LossClosure = std::function<TensorPtr(Tape*)>;

// Central-difference gradient verification over every entry of every
// parameter in the store. Returns
//   max |autodiff - fd| / max(|autodiff|, |fd|, 1e-8).
// eps must lie in (0, 1e-2]. A closure whose two value-only evaluations
// disagree bitwise is rejected as non-deterministic (UsageError).
double grad_check(const LossClosure& loss_fn, ParameterStore& params, double eps);

}  // namespace refnet
