#pragma once

#include <utility>

#include "refnet/ops.hpp"
#include "refnet/param.hpp"

namespace refnet {

// One LSTM cell. Gates are packed i, f, g, o along the first axis of W/U/b.
struct LstmCellParams {
  TensorPtr W;  // [4H, input_dim]
  TensorPtr U;  // [4H, H]
  TensorPtr b;  // [4H]
  int hidden = 0;
};

LstmCellParams make_lstm_cell(ParameterStore& store, const std::string& prefix, int input_dim,
                              int hidden, std::mt19937_64& rng, double forget_bias = 1.0);

// Standard gate equations:
//   i = sig(Wi x + Ui h + bi), f = sig(...), g = tanh(...), o = sig(...)
//   c = f (.) c_prev + i (.) g,  h = o (.) tanh(c)
std::pair<TensorPtr, TensorPtr> lstm_cell_step(Tape* tape, const TensorPtr& x,
                                               const TensorPtr& h_prev, const TensorPtr& c_prev,
                                               const LstmCellParams& params);

}  // namespace refnet
