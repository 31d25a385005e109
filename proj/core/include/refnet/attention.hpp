#pragma once

#include <random>

#include "refnet/ops.hpp"
#include "refnet/param.hpp"

namespace refnet {

// Additive attention: score_i = v . tanh(W_q q + W_k k_i), masked softmax,
// context = sum_i weight_i k_i. The three networks A1/A2/A3 are independent
// instances of this parameter set (no sharing).
struct AttentionParams {
  TensorPtr W_query;  // [att_dim, query_dim]
  TensorPtr W_key;    // [key_dim, att_dim]
  TensorPtr v;        // [att_dim]
};

AttentionParams make_attention(ParameterStore& store, const std::string& prefix, int query_dim,
                               int key_dim, int att_dim, std::mt19937_64& rng);

// Key projections are query-independent, so they are computed once per
// sequence and reused across decode steps.
struct PreparedKeys {
  TensorPtr keys;  // [m, key_dim]
  TensorPtr proj;  // [m, att_dim]
};

PreparedKeys prepare_keys(Tape* tape, const AttentionParams& params, const TensorPtr& keys);

struct AttendResult {
  TensorPtr weights;  // [m], masked softmax of scores
  TensorPtr context;  // [key_dim]
};

AttendResult attend_prepared(Tape* tape, const AttentionParams& params, const PreparedKeys& keys,
                             const TensorPtr& query, const std::vector<uint8_t>& mask);

// One-shot form matching the spec signature.
AttendResult attend(Tape* tape, const TensorPtr& query, const TensorPtr& keys,
                    const std::vector<uint8_t>& mask, const AttentionParams& params);

}  // namespace refnet
