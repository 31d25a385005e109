#include "refnet/decoder.hpp"

#include "refnet/error.hpp"
#include "refnet/param.hpp"

namespace refnet {

DecoderParams make_decoder(ParameterStore& store, const std::string& prefix, int emb_dim,
                           int width, int layers, int att_dim, std::mt19937_64& rng,
                           int extra_input_dim) {
  if (layers < 1) throw ConfigError("make_decoder: layers must be >= 1");
  DecoderParams p;
  p.width = width;
  // Layer 0 consumes [emb; context; (draft context); ha].
  int in_dim = emb_dim + width + extra_input_dim + width;
  for (int layer = 0; layer < layers; ++layer) {
    p.layers.push_back(make_lstm_cell(store, prefix + ".lstm.l" + std::to_string(layer), in_dim,
                                      width, rng));
    in_dim = width;
  }
  p.attn = make_attention(store, prefix + ".attn", width, width, att_dim, rng);
  p.pointer.w_state = store.create(prefix + ".ptr.w_state", {width}, {Init::UniformFanIn}, rng);
  p.pointer.w_context =
      store.create(prefix + ".ptr.w_context", {width}, {Init::UniformFanIn}, rng);
  p.pointer.w_input = store.create(prefix + ".ptr.w_input", {emb_dim}, {Init::UniformFanIn}, rng);
  p.pointer.b = store.create(prefix + ".ptr.b", {1}, {Init::Zeros}, rng);
  for (int layer = 0; layer < layers; ++layer) {
    p.init_h.push_back(store.create(prefix + ".init_h.l" + std::to_string(layer),
                                    {width, 2 * width}, {Init::UniformFanIn}, rng));
    p.init_c.push_back(store.create(prefix + ".init_c.l" + std::to_string(layer),
                                    {width, 2 * width}, {Init::UniformFanIn}, rng));
  }
  return p;
}

DecoderState init_decoder_state(Tape* tape, const DecoderParams& params, const TensorPtr& U,
                                const TensorPtr& ha) {
  auto summary = concat(tape, {mean_rows(tape, U), ha});
  DecoderState s;
  for (size_t layer = 0; layer < params.layers.size(); ++layer) {
    s.h.push_back(tanh(tape, matmul(tape, params.init_h[layer], summary)));
    s.c.push_back(tanh(tape, matmul(tape, params.init_c[layer], summary)));
  }
  return s;
}

namespace {

DecoderState run_stack(Tape* tape, const TensorPtr& input, const DecoderState& state,
                       const DecoderParams& params) {
  DecoderState next;
  TensorPtr x = input;
  for (size_t layer = 0; layer < params.layers.size(); ++layer) {
    auto [h, c] = lstm_cell_step(tape, x, state.h[layer], state.c[layer], params.layers[layer]);
    next.h.push_back(h);
    next.c.push_back(c);
    x = h;
  }
  return next;
}

TensorPtr pointer_gate(Tape* tape, const PointerParams& ptr, const TensorPtr& h,
                       const TensorPtr& context, const TensorPtr& input_emb) {
  auto pre = add(tape,
                 add(tape, matmul(tape, ptr.w_state, h), matmul(tape, ptr.w_context, context)),
                 add(tape, matmul(tape, ptr.w_input, input_emb), ptr.b));
  return sigmoid(tape, pre);
}

}  // namespace

StepResult preliminary_step(Tape* tape, const TensorPtr& prev_emb, const TensorPtr& prev_context,
                            const TensorPtr& ha, const DecoderState& state,
                            const PreparedKeys& passage_keys, const std::vector<uint8_t>& mask,
                            const DecoderParams& params, const OutputProjection& proj) {
  StepResult out;
  auto input = concat(tape, {prev_emb, prev_context, ha});
  out.state = run_stack(tape, input, state, params);
  const auto& query = out.state.h.back();
  auto att = attend_prepared(tape, params.attn, passage_keys, query, mask);
  out.context = att.context;
  out.attn_weights = att.weights;
  auto u = matmul(tape, proj.W_c, concat(tape, {query, out.context}));
  out.vocab_dist = softmax(tape, matmul(tape, proj.W_o, u));
  out.p_gen = pointer_gate(tape, params.pointer, query, out.context, prev_emb);
  return out;
}

DualAttentionResult dual_attention(Tape* tape, const TensorPtr& query,
                                   const PreparedKeys& passage_keys,
                                   const std::vector<uint8_t>& passage_mask,
                                   const PreparedKeys& draft_keys,
                                   const std::vector<uint8_t>& draft_mask,
                                   const AttentionParams& passage_attn,
                                   const AttentionParams& draft_attn) {
  DualAttentionResult out;
  auto a2 = attend_prepared(tape, passage_attn, passage_keys, query, passage_mask);
  out.passage_context = a2.context;
  out.passage_weights = a2.weights;
  auto a3 = attend_prepared(tape, draft_attn, draft_keys, query, draft_mask);
  out.draft_context = a3.context;
  out.draft_weights = a3.weights;
  return out;
}

StepResult refinement_step(Tape* tape, const TensorPtr& prev_emb, const TensorPtr& prev_context,
                           const TensorPtr& prev_draft_context, const TensorPtr& ha,
                           const DecoderState& state, const PreparedKeys& passage_keys,
                           const std::vector<uint8_t>& passage_mask,
                           const PreparedKeys* draft_keys, const std::vector<uint8_t>& draft_mask,
                           const RefinementParams& params, const OutputProjection& proj,
                           bool lagged_output) {
  StepResult out;
  auto input = concat(tape, {prev_emb, prev_context, prev_draft_context, ha});
  out.state = run_stack(tape, input, state, params.base);
  const auto& query = out.state.h.back();

  auto a2 = attend_prepared(tape, params.base.attn, passage_keys, query, passage_mask);
  out.context = a2.context;
  out.attn_weights = a2.weights;
  if (draft_keys != nullptr) {
    auto a3 = attend_prepared(tape, params.draft_attn, *draft_keys, query, draft_mask);
    out.draft_context = a3.context;
    out.draft_weights = a3.weights;
  } else {
    // A3 disabled: zero value pathway, output independent of draft content.
    out.draft_context = make_tensor({prev_draft_context->size()});
  }

  const TensorPtr& c_for_output = lagged_output ? prev_context : out.context;
  const TensorPtr& g_for_output = lagged_output ? prev_draft_context : out.draft_context;
  auto u = matmul(tape, proj.W_c_refine, concat(tape, {query, c_for_output, g_for_output}));
  out.vocab_dist = softmax(tape, matmul(tape, proj.W_o, u));
  out.p_gen = pointer_gate(tape, params.base.pointer, query, out.context, prev_emb);
  return out;
}

TensorPtr copy_mix(Tape* tape, const TensorPtr& vocab_dist, const TensorPtr& passage_attention,
                   const TensorPtr& p_gen, const std::vector<int>& extended_ids, int oov_count) {
  if (static_cast<int>(extended_ids.size()) != passage_attention->size()) {
    throw ConfigError("copy_mix: attention " + passage_attention->shape_str() + " vs " +
                      std::to_string(extended_ids.size()) + " extended ids");
  }
  const int ext_size = vocab_dist->size() + oov_count;
  auto one = make_scalar(1.0);
  auto generate_part = pad_to(tape, scale(tape, vocab_dist, p_gen), ext_size);
  auto copy_part = scatter_sum(tape, scale(tape, passage_attention, sub(tape, one, p_gen)),
                               extended_ids, ext_size);
  return add(tape, generate_part, copy_part);
}

std::pair<TensorPtr, TensorPtr> coverage_step(Tape* tape, const TensorPtr& coverage,
                                              const TensorPtr& attention) {
  auto penalty = sum(tape, minimum(tape, coverage, attention));
  auto next = add(tape, coverage, attention);
  return {next, penalty};
}

CoverageState init_coverage(int passage_len) {
  return {make_tensor({passage_len}), make_scalar(0.0)};
}

CoverageState advance_coverage(Tape* tape, const CoverageState& state,
                               const TensorPtr& attention) {
  auto [next, penalty] = coverage_step(tape, state.coverage, attention);
  return {next, add(tape, state.penalty, penalty)};
}

int argmax_token(const TensorPtr& dist) {
  int best = 0;
  for (int i = 1; i < dist->size(); ++i) {
    if (dist->values[i] > dist->values[best]) best = i;
  }
  return best;
}

int sample_token(const TensorPtr& dist, std::mt19937_64& rng) {
  const double u = uniform_real(rng, 0.0, 1.0);
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < dist->size(); ++i) {
    if (dist->values[i] <= 0.0) continue;
    last_positive = i;
    acc += dist->values[i];
    if (u < acc) return i;
  }
  if (last_positive < 0) throw NumericError("sample_token: distribution has no mass");
  return last_positive;  // u landed in the rounding tail
}

}  // namespace refnet
