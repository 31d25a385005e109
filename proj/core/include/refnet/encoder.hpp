#pragma once

#include <random>
#include <vector>

#include "refnet/embedding.hpp"
#include "refnet/lstm.hpp"

namespace refnet {

struct BiLstmLayerParams {
  LstmCellParams fwd;
  LstmCellParams bwd;
};

// Passage/answer encoder: stacked BiLSTM over token embeddings, a 1-layer
// BiLSTM over the answer, and the fusion layer producing the answer-aware
// passage matrix U. `l` is the post-concatenation width (2x per-direction
// hidden size) and is used uniformly for h^p, h^a and U.
struct EncoderParams {
  std::vector<BiLstmLayerParams> context_layers;
  BiLstmLayerParams answer_layer;
  TensorPtr fuse_weight;  // W_u, [l, 3l]
  int hidden_per_dir = 0;
  int width() const { return 2 * hidden_per_dir; }
};

EncoderParams make_encoder(ParameterStore& store, const EmbeddingTables& tables,
                           int hidden_per_dir, int context_layers, std::mt19937_64& rng);

// Runs one BiLSTM layer over the rows of `inputs` ([m, d]) and returns the
// per-position concatenation of forward and backward states, [m, 2H].
TensorPtr bilstm_over_rows(Tape* tape, const TensorPtr& inputs, const BiLstmLayerParams& layer);

// Stacked contextual pass; layer k consumes layer k-1's output. [m, l].
TensorPtr contextual_encode(Tape* tape, const TensorPtr& embeddings, const EncoderParams& params);

// Span answers feed [e(w^a_t); h^p_{span_start + t}] through the answer
// BiLSTM; non-span answers feed the embedding zero-padded to the same width.
// Returns h^a of width l (forward and backward final states).
TensorPtr encode_answer(Tape* tape, const BatchEntry& entry, const TensorPtr& hp,
                        const EmbeddingTables& tables, const EncoderParams& params);

// tanh(W_u [h^p_i; h^a; h^p_i (.) h^a]) for every row of hp. [m, l].
TensorPtr fuse(Tape* tape, const TensorPtr& hp, const TensorPtr& ha, const TensorPtr& fuse_weight);

struct EncodeResult {
  TensorPtr U;   // fused answer-aware states, [m, l]
  TensorPtr hp;  // raw contextual states, [m, l]
  TensorPtr ha;  // answer vector, [l]
  std::vector<uint8_t> mask;  // all ones at desk scale (no padding inside the model)
};

EncodeResult encode_example(Tape* tape, const BatchEntry& entry, const EmbeddingTables& tables,
                            const EncoderParams& params, bool zero_answer_vector = false);

}  // namespace refnet
