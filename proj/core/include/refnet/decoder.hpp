#pragma once

#include <random>

#include "refnet/attention.hpp"
#include "refnet/lstm.hpp"

namespace refnet {

// Output projections. W_o is a single parameter referenced by both decoders;
// W_c combines [h; c] for the preliminary decoder, W_c_refine combines
// [h; c; g] for the refinement decoder.
struct OutputProjection {
  TensorPtr W_c;         // [l, 2l]
  TensorPtr W_c_refine;  // [l, 2l + emb]
  TensorPtr W_o;         // [V, l]
};

// p_gen = sigmoid(w_state . h + w_context . c + w_input . e(q_{t-1}) + b)
struct PointerParams {
  TensorPtr w_state;
  TensorPtr w_context;
  TensorPtr w_input;
  TensorPtr b;  // [1]
};

// Stacked unidirectional LSTM decoder with one passage attention network
// (A1 for the preliminary decoder, A2 for the refinement decoder) and its
// own pointer gate. Hidden/cell states are initialized from a learned linear
// map of [mean(U); h^a].
struct DecoderParams {
  std::vector<LstmCellParams> layers;
  AttentionParams attn;
  PointerParams pointer;
  std::vector<TensorPtr> init_h;  // per layer, [l, 2l]
  std::vector<TensorPtr> init_c;
  int width = 0;  // l
};

// The refinement decoder adds the draft attention arm A3, whose keys and
// values are the draft token embeddings (not hidden states).
struct RefinementParams {
  DecoderParams base;
  AttentionParams draft_attn;
};

DecoderParams make_decoder(ParameterStore& store, const std::string& prefix, int emb_dim,
                           int width, int layers, int att_dim, std::mt19937_64& rng,
                           int extra_input_dim = 0);

struct DecoderState {
  std::vector<TensorPtr> h;
  std::vector<TensorPtr> c;
};

DecoderState init_decoder_state(Tape* tape, const DecoderParams& params, const TensorPtr& U,
                                const TensorPtr& ha);

struct StepResult {
  DecoderState state;
  TensorPtr context;        // c_t over U
  TensorPtr attn_weights;   // alpha_t (A1) or gamma_t (A2)
  TensorPtr p_gen;          // [1]
  TensorPtr vocab_dist;     // softmax over V, before copy mixing
  TensorPtr draft_context;  // g_t (refinement only, null otherwise)
  TensorPtr draft_weights;  // beta_t (refinement only, null otherwise)
};

// One preliminary-decoder step. LSTM input is [e(q~_{t-1}); c~_{t-1}; h^a];
// the distribution is softmax(W_o (W_c [h~_t; c~_t])).
StepResult preliminary_step(Tape* tape, const TensorPtr& prev_emb, const TensorPtr& prev_context,
                            const TensorPtr& ha, const DecoderState& state,
                            const PreparedKeys& passage_keys, const std::vector<uint8_t>& mask,
                            const DecoderParams& params, const OutputProjection& proj);

struct DualAttentionResult {
  TensorPtr passage_context;  // c_t
  TensorPtr passage_weights;  // gamma_t
  TensorPtr draft_context;    // g_t
  TensorPtr draft_weights;    // beta_t
};

// A2 over the fused passage states, A3 over the draft token embeddings, both
// queried with the same refinement state.
DualAttentionResult dual_attention(Tape* tape, const TensorPtr& query,
                                   const PreparedKeys& passage_keys,
                                   const std::vector<uint8_t>& passage_mask,
                                   const PreparedKeys& draft_keys,
                                   const std::vector<uint8_t>& draft_mask,
                                   const AttentionParams& passage_attn,
                                   const AttentionParams& draft_attn);

// One refinement-decoder step. LSTM input is [e(q_{t-1}); c_{t-1}; g_{t-1};
// h^a]. With `lagged_output` the output projection consumes c_{t-1}, g_{t-1}
// exactly as printed in the recurrence; otherwise c_t, g_t. A null
// draft_keys disables A3: g_t is a zero vector, making the output
// independent of the draft content.
StepResult refinement_step(Tape* tape, const TensorPtr& prev_emb, const TensorPtr& prev_context,
                           const TensorPtr& prev_draft_context, const TensorPtr& ha,
                           const DecoderState& state, const PreparedKeys& passage_keys,
                           const std::vector<uint8_t>& passage_mask,
                           const PreparedKeys* draft_keys, const std::vector<uint8_t>& draft_mask,
                           const RefinementParams& params, const OutputProjection& proj,
                           bool lagged_output);

// final(w) = p_gen * vocab(w) + (1 - p_gen) * sum_{i: ext_ids[i] == w} att_i
// over the extended vocabulary of size V + oov_count.
TensorPtr copy_mix(Tape* tape, const TensorPtr& vocab_dist, const TensorPtr& passage_attention,
                   const TensorPtr& p_gen, const std::vector<int>& extended_ids, int oov_count);

// penalty = sum_i min(coverage_i, attention_i); new coverage adds attention.
std::pair<TensorPtr, TensorPtr> coverage_step(Tape* tape, const TensorPtr& coverage,
                                              const TensorPtr& attention);

// Running copy of the passage attention mass per source position plus the
// accumulated penalty; entries never decrease across steps.
struct CoverageState {
  TensorPtr coverage;
  TensorPtr penalty;  // scalar, sum of per-step penalties
};
CoverageState init_coverage(int passage_len);
CoverageState advance_coverage(Tape* tape, const CoverageState& state, const TensorPtr& attention);

struct Draft {
  std::vector<int> tokens;       // extended ids, EOS-terminated unless cut at max_len
  std::vector<double> logprobs;  // per emitted token, from the copy-mixed dist
  std::vector<std::vector<double>> attention;  // per step over the passage
  int length() const { return static_cast<int>(tokens.size()); }
};

struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0.0;
  DecoderState state;
  TensorPtr context;
  TensorPtr draft_context;
  CoverageState coverage;
  bool finished = false;
};

// Greedy argmax with ties resolved to the lowest id.
int argmax_token(const TensorPtr& dist);
// Inverse-CDF sample using the raw engine output (portable determinism).
int sample_token(const TensorPtr& dist, std::mt19937_64& rng);

}  // namespace refnet
