#include "refnet/encoder.hpp"

#include "refnet/error.hpp"

namespace refnet {

EncoderParams make_encoder(ParameterStore& store, const EmbeddingTables& tables,
                           int hidden_per_dir, int context_layers, std::mt19937_64& rng) {
  if (hidden_per_dir < 1 || context_layers < 1) {
    throw ConfigError("make_encoder: hidden_per_dir and context_layers must be >= 1");
  }
  EncoderParams p;
  p.hidden_per_dir = hidden_per_dir;
  int in_dim = tables.passage_dim();
  for (int layer = 0; layer < context_layers; ++layer) {
    const std::string prefix = "encoder.ctx.l" + std::to_string(layer);
    p.context_layers.push_back(
        {make_lstm_cell(store, prefix + ".fwd", in_dim, hidden_per_dir, rng),
         make_lstm_cell(store, prefix + ".bwd", in_dim, hidden_per_dir, rng)});
    in_dim = 2 * hidden_per_dir;
  }
  const int ans_in = tables.answer_dim() + p.width();
  p.answer_layer = {make_lstm_cell(store, "encoder.answer.fwd", ans_in, hidden_per_dir, rng),
                    make_lstm_cell(store, "encoder.answer.bwd", ans_in, hidden_per_dir, rng)};
  p.fuse_weight = store.create("encoder.W_u", {p.width(), 3 * p.width()}, {Init::UniformFanIn},
                               rng);
  return p;
}

namespace {

std::vector<TensorPtr> run_direction(Tape* tape, const std::vector<TensorPtr>& inputs,
                                     const LstmCellParams& cell, bool reverse) {
  const int m = static_cast<int>(inputs.size());
  std::vector<TensorPtr> states(m);
  auto h = make_tensor({cell.hidden});
  auto c = make_tensor({cell.hidden});
  for (int step = 0; step < m; ++step) {
    const int t = reverse ? m - 1 - step : step;
    auto [nh, nc] = lstm_cell_step(tape, inputs[t], h, c, cell);
    h = nh;
    c = nc;
    states[t] = h;
  }
  return states;
}

std::vector<TensorPtr> matrix_rows(Tape* tape, const TensorPtr& m) {
  std::vector<TensorPtr> rows;
  rows.reserve(m->rows());
  for (int i = 0; i < m->rows(); ++i) rows.push_back(row(tape, m, i));
  return rows;
}

}  // namespace

TensorPtr bilstm_over_rows(Tape* tape, const TensorPtr& inputs, const BiLstmLayerParams& layer) {
  auto in_rows = matrix_rows(tape, inputs);
  auto fwd = run_direction(tape, in_rows, layer.fwd, false);
  auto bwd = run_direction(tape, in_rows, layer.bwd, true);
  std::vector<TensorPtr> out;
  out.reserve(in_rows.size());
  for (size_t t = 0; t < in_rows.size(); ++t) out.push_back(concat(tape, {fwd[t], bwd[t]}));
  return stack_rows(tape, out);
}

TensorPtr contextual_encode(Tape* tape, const TensorPtr& embeddings,
                            const EncoderParams& params) {
  auto h = embeddings;
  for (const auto& layer : params.context_layers) h = bilstm_over_rows(tape, h, layer);
  return h;
}

TensorPtr encode_answer(Tape* tape, const BatchEntry& entry, const TensorPtr& hp,
                        const EmbeddingTables& tables, const EncoderParams& params) {
  const int n = static_cast<int>(entry.answer_ids.size());
  if (n == 0) throw UsageError("encode_answer: empty answer in example " + entry.id);
  std::vector<TensorPtr> inputs;
  inputs.reserve(n);
  for (int t = 0; t < n; ++t) {
    auto emb = tables.answer_token_embed(tape, entry.answer_ids[t], entry.answer_char_ids[t]);
    if (entry.has_span && t < entry.span_len) {
      inputs.push_back(concat(tape, {emb, row(tape, hp, entry.span_start + t)}));
    } else {
      // Non-span answers: embedding only, zero-padded to the span-case width.
      inputs.push_back(concat(tape, {emb, make_tensor({params.width()})}));
    }
  }
  auto fwd = run_direction(tape, inputs, params.answer_layer.fwd, false);
  auto bwd = run_direction(tape, inputs, params.answer_layer.bwd, true);
  return concat(tape, {fwd.back(), bwd.front()});
}

TensorPtr fuse(Tape* tape, const TensorPtr& hp, const TensorPtr& ha,
               const TensorPtr& fuse_weight) {
  std::vector<TensorPtr> rows_out;
  rows_out.reserve(hp->rows());
  for (int i = 0; i < hp->rows(); ++i) {
    auto hp_i = row(tape, hp, i);
    auto fused = concat(tape, {hp_i, ha, hadamard(tape, hp_i, ha)});
    rows_out.push_back(tanh(tape, matmul(tape, fuse_weight, fused)));
  }
  return stack_rows(tape, rows_out);
}

EncodeResult encode_example(Tape* tape, const BatchEntry& entry, const EmbeddingTables& tables,
                            const EncoderParams& params, bool zero_answer_vector) {
  EncodeResult out;
  auto embeddings = embed_passage(tape, entry, tables);
  out.hp = contextual_encode(tape, embeddings, params);
  out.ha = encode_answer(tape, entry, out.hp, tables, params);
  if (zero_answer_vector) out.ha = make_tensor({params.width()});
  out.U = fuse(tape, out.hp, out.ha, params.fuse_weight);
  out.mask.assign(static_cast<size_t>(out.U->rows()), 1);
  return out;
}

}  // namespace refnet
