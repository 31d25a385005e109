#include "refnet/lstm.hpp"

#include "refnet/error.hpp"

namespace refnet {

LstmCellParams make_lstm_cell(ParameterStore& store, const std::string& prefix, int input_dim,
                              int hidden, std::mt19937_64& rng, double forget_bias) {
  LstmCellParams p;
  p.hidden = hidden;
  p.W = store.create(prefix + ".W", {4 * hidden, input_dim}, {Init::UniformFanIn}, rng);
  p.U = store.create(prefix + ".U", {4 * hidden, hidden}, {Init::UniformFanIn}, rng);
  p.b = store.create(prefix + ".b", {4 * hidden}, {Init::Zeros}, rng);
  for (int k = hidden; k < 2 * hidden; ++k) p.b->values[k] = forget_bias;
  return p;
}

std::pair<TensorPtr, TensorPtr> lstm_cell_step(Tape* tape, const TensorPtr& x,
                                               const TensorPtr& h_prev, const TensorPtr& c_prev,
                                               const LstmCellParams& params) {
  const int h = params.hidden;
  if (x->size() != params.W->shape[1] || h_prev->size() != h || c_prev->size() != h) {
    throw ConfigError("lstm_cell_step: dimension mismatch, x " + x->shape_str() + ", h " +
                      h_prev->shape_str() + ", c " + c_prev->shape_str() + " vs W " +
                      params.W->shape_str());
  }
  auto pre = add(tape, add(tape, matmul(tape, params.W, x), matmul(tape, params.U, h_prev)),
                 params.b);
  auto gi = sigmoid(tape, slice(tape, pre, 0, h));
  auto gf = sigmoid(tape, slice(tape, pre, h, h));
  auto gg = tanh(tape, slice(tape, pre, 2 * h, h));
  auto go = sigmoid(tape, slice(tape, pre, 3 * h, h));
  auto c = add(tape, hadamard(tape, gf, c_prev), hadamard(tape, gi, gg));
  auto out_h = hadamard(tape, go, tanh(tape, c));
  return {out_h, c};
}

}  // namespace refnet
