#pragma once

#include <cstdint>
#include <vector>

#include "refnet/tape.hpp"
#include "refnet/tensor.hpp"

namespace refnet {

// Primitive differentiable operations. Every op runs the forward computation
// immediately; when `tape` is non-null and any input requires gradients, a
// backward closure is recorded. With a null tape the result is value-only
// (stop-gradient), which is how inference passes reuse on-tape tensors.
//
// Shape mismatches throw ConfigError naming both shapes; domain violations
// and non-finite outputs throw NumericError.

// Elementwise, shapes must match exactly.
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr hadamard(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// min(a, b); on ties the gradient goes to `a`.
TensorPtr minimum(Tape* tape, const TensorPtr& a, const TensorPtr& b);

TensorPtr tanh(Tape* tape, const TensorPtr& a);
TensorPtr sigmoid(Tape* tape, const TensorPtr& a);
TensorPtr log(Tape* tape, const TensorPtr& a);

// a * s with s a scalar tensor (grad flows to both) or a plain constant.
TensorPtr scale(Tape* tape, const TensorPtr& a, const TensorPtr& s);
TensorPtr scale_const(Tape* tape, const TensorPtr& a, double c);

// [m,k]x[k,n] -> [m,n]; [m,k]x[k] -> [m]; [k]x[k,n] -> [n]; [k]x[k] -> [1].
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);

// Vector concatenation / slicing.
TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr slice(Tape* tape, const TensorPtr& v, int start, int len);
TensorPtr pad_to(Tape* tape, const TensorPtr& v, int new_len);

// Rows <-> matrix.
TensorPtr stack_rows(Tape* tape, const std::vector<TensorPtr>& rows);
TensorPtr row(Tape* tape, const TensorPtr& m, int i);
TensorPtr mean_rows(Tape* tape, const TensorPtr& m);
// Elementwise max over rows; ties resolve to the earliest row.
TensorPtr max_rows(Tape* tape, const TensorPtr& m);
// out[i,:] = m[i,:] + v
TensorPtr broadcast_add_row(Tape* tape, const TensorPtr& m, const TensorPtr& v);

TensorPtr softmax(Tape* tape, const TensorPtr& v);
// mask[i] == 0 excludes position i (output 0 there). Throws UsageError if
// everything is masked.
TensorPtr masked_softmax(Tape* tape, const TensorPtr& v, const std::vector<uint8_t>& mask);

TensorPtr sum(Tape* tape, const TensorPtr& a);

// Row `id` of `table` as a vector; gradient scatters into that row.
TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, int id);

// out[ids[i]] += w[i], out has out_size entries. ids may repeat.
TensorPtr scatter_sum(Tape* tape, const TensorPtr& w, const std::vector<int>& ids, int out_size);

// -log(dist[target]), floored at kProbFloor to keep the loss finite when a
// target is unreachable (e.g. p_gen == 1 with an OOV target).
inline constexpr double kProbFloor = 1e-12;
TensorPtr negative_log_likelihood(Tape* tape, const TensorPtr& dist, int target);

namespace testing {
// Selfcheck fault injection: perturbs the tanh backward rule so grad_check
// must detect it. Never set outside tests/selfcheck.
extern bool corrupt_tanh_backward;
}  // namespace testing

}  // namespace refnet
