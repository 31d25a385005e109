#include "refnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "refnet/error.hpp"

namespace refnet {

RefNetModel::RefNetModel(const ModelConfig& config, int vocab_size, uint64_t seed)
    : config_(config), vocab_size_(vocab_size) {
  if (vocab_size < Vocabulary::kReserved) throw ConfigError("RefNetModel: vocab too small");
  std::mt19937_64 rng(seed);
  EmbeddingConfig ec;
  ec.word_dim = config.word_dim;
  ec.char_dim = config.char_dim;
  ec.char_proj_dim = config.char_proj_dim;
  ec.tag_dim = config.tag_dim;
  ec.pos_dim = config.pos_dim;
  ec.pos_clip = config.pos_clip;
  ec.use_char = config.use_char;
  ec.use_tag = config.use_tag;
  ec.use_pos = config.use_pos;
  tables_ = std::make_unique<EmbeddingTables>(store_, ec, vocab_size, rng);

  encoder_ = make_encoder(store_, *tables_, config.hidden_per_dir, config.enc_layers, rng);

  const int l = config.width();
  const int att = config.attention_dim();
  prelim_ = make_decoder(store_, "prelim", config.word_dim, l, config.dec_layers, att, rng);
  refine_.base = make_decoder(store_, "refine", config.word_dim, l, config.dec_layers, att, rng,
                              /*extra_input_dim=*/config.word_dim);
  refine_.draft_attn = make_attention(store_, "refine.attn_draft", l, config.word_dim, att, rng);

  proj_.W_c = store_.create("proj.W_c_prelim", {l, 2 * l}, {Init::UniformFanIn}, rng);
  proj_.W_c_refine =
      store_.create("proj.W_c_refine", {l, 2 * l + config.word_dim}, {Init::UniformFanIn}, rng);
  proj_.W_o = store_.create("proj.W_o", {vocab_size, l}, {Init::UniformFanIn}, rng);
}

bool RefNetModel::is_preliminary_exclusive(const std::string& name) {
  return name.rfind("prelim.", 0) == 0 || name == "proj.W_c_prelim";
}

EncodeResult RefNetModel::encode(Tape* tape, const BatchEntry& entry,
                                 bool zero_answer_vector) const {
  return encode_example(tape, entry, *tables_, encoder_, zero_answer_vector);
}

TensorPtr RefNetModel::feedback_embedding(Tape* tape, int token_id) const {
  const int id = token_id >= vocab_size_ ? Vocabulary::kUnk : token_id;
  return tables_->word_embed(tape, id);
}

PreparedKeys RefNetModel::draft_keys_for(Tape* tape, const std::vector<int>& draft_tokens) const {
  std::vector<TensorPtr> rows;
  rows.reserve(draft_tokens.size());
  for (int id : draft_tokens) rows.push_back(feedback_embedding(tape, id));
  return prepare_keys(tape, refine_.draft_attn, stack_rows(tape, rows));
}

ForcedPass RefNetModel::forced_preliminary(Tape* tape, const EncodeResult& enc,
                                           const BatchEntry& entry) const {
  ForcedPass out;
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, prelim_.attn, enc.U);
  auto state = init_decoder_state(tape, prelim_, enc.U, enc.ha);
  auto context = make_tensor({config_.width()});
  auto cov = init_coverage(enc.U->rows());

  const int steps = static_cast<int>(entry.question_target_ids.size());
  for (int t = 0; t < steps; ++t) {
    auto emb = feedback_embedding(tape, entry.question_input_ids[t]);
    auto step = preliminary_step(tape, emb, context, enc.ha, state, keys, enc.mask, prelim_,
                                 proj_);
    auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                          entry.passage_ext_ids, oov);
    out.step_nlls.push_back(
        negative_log_likelihood(tape, mixed, entry.question_target_ids[t]));
    out.mixed_dists.push_back(mixed);
    out.vocab_dists.push_back(step.vocab_dist);
    cov = advance_coverage(tape, cov, step.attn_weights);
    state = std::move(step.state);
    context = step.context;
  }
  out.coverage_penalty = cov.penalty;
  out.steps = steps;
  return out;
}

ForcedPass RefNetModel::forced_refinement(Tape* tape, const EncodeResult& enc,
                                          const BatchEntry& entry,
                                          const std::vector<int>& draft_tokens) const {
  if (draft_tokens.empty()) throw UsageError("forced_refinement: empty draft");
  ForcedPass out;
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, refine_.base.attn, enc.U);
  PreparedKeys draft_keys;
  std::vector<uint8_t> draft_mask(draft_tokens.size(), 1);
  if (config_.use_a3) draft_keys = draft_keys_for(tape, draft_tokens);

  auto state = init_decoder_state(tape, refine_.base, enc.U, enc.ha);
  auto context = make_tensor({config_.width()});
  auto draft_context = make_tensor({config_.word_dim});
  auto cov = init_coverage(enc.U->rows());

  const int steps = static_cast<int>(entry.question_target_ids.size());
  for (int t = 0; t < steps; ++t) {
    auto emb = feedback_embedding(tape, entry.question_input_ids[t]);
    auto step = refinement_step(tape, emb, context, draft_context, enc.ha, state, keys, enc.mask,
                                config_.use_a3 ? &draft_keys : nullptr, draft_mask, refine_,
                                proj_, config_.lagged_output_contexts);
    auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                          entry.passage_ext_ids, oov);
    out.step_nlls.push_back(
        negative_log_likelihood(tape, mixed, entry.question_target_ids[t]));
    out.mixed_dists.push_back(mixed);
    out.vocab_dists.push_back(step.vocab_dist);
    cov = advance_coverage(tape, cov, step.attn_weights);
    state = std::move(step.state);
    context = step.context;
    draft_context = step.draft_context;
  }
  out.coverage_penalty = cov.penalty;
  out.steps = steps;
  return out;
}

namespace {

std::vector<double> tensor_row(const TensorPtr& t) { return t->values; }

}  // namespace

Draft RefNetModel::decode_draft(DecodeMode mode, const EncodeResult& enc, const BatchEntry& entry,
                                int max_len, std::mt19937_64* rng) const {
  if (max_len < 1) throw UsageError("decode_draft: max_len must be >= 1");
  if (mode == DecodeMode::Sample && rng == nullptr) {
    throw UsageError("decode_draft: sampling requires an RNG");
  }
  Draft draft;
  Tape* tape = nullptr;  // value-only; token choices are discrete anyway
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, prelim_.attn, enc.U);
  auto state = init_decoder_state(tape, prelim_, enc.U, enc.ha);
  auto context = make_tensor({config_.width()});

  int prev = Vocabulary::kSos;
  for (int t = 0; t < max_len; ++t) {
    auto emb = feedback_embedding(tape, prev);
    auto step =
        preliminary_step(tape, emb, context, enc.ha, state, keys, enc.mask, prelim_, proj_);
    auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                          entry.passage_ext_ids, oov);
    const int token =
        mode == DecodeMode::Greedy ? argmax_token(mixed) : sample_token(mixed, *rng);
    draft.tokens.push_back(token);
    draft.logprobs.push_back(std::log(std::max(mixed->values[token], kProbFloor)));
    draft.attention.push_back(tensor_row(step.attn_weights));
    state = std::move(step.state);
    context = step.context;
    prev = token;
    if (token == Vocabulary::kEos) break;
  }
  return draft;
}

Draft RefNetModel::greedy_refinement(const EncodeResult& enc, const BatchEntry& entry,
                                     const std::vector<int>& draft_tokens, int max_len) const {
  if (draft_tokens.empty()) throw UsageError("greedy_refinement: empty draft");
  Draft out;
  Tape* tape = nullptr;
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, refine_.base.attn, enc.U);
  PreparedKeys draft_keys;
  std::vector<uint8_t> draft_mask(draft_tokens.size(), 1);
  if (config_.use_a3) draft_keys = draft_keys_for(tape, draft_tokens);

  auto state = init_decoder_state(tape, refine_.base, enc.U, enc.ha);
  auto context = make_tensor({config_.width()});
  auto draft_context = make_tensor({config_.word_dim});

  int prev = Vocabulary::kSos;
  for (int t = 0; t < max_len; ++t) {
    auto emb = feedback_embedding(tape, prev);
    auto step = refinement_step(tape, emb, context, draft_context, enc.ha, state, keys, enc.mask,
                                config_.use_a3 ? &draft_keys : nullptr, draft_mask, refine_,
                                proj_, config_.lagged_output_contexts);
    auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                          entry.passage_ext_ids, oov);
    const int token = argmax_token(mixed);
    out.tokens.push_back(token);
    out.logprobs.push_back(std::log(std::max(mixed->values[token], kProbFloor)));
    out.attention.push_back(tensor_row(step.attn_weights));
    state = std::move(step.state);
    context = step.context;
    draft_context = step.draft_context;
    prev = token;
    if (token == Vocabulary::kEos) break;
  }
  return out;
}

SampledSequence RefNetModel::sample_refinement(Tape* tape, const EncodeResult& enc,
                                               const BatchEntry& entry,
                                               const std::vector<int>& draft_tokens, int max_len,
                                               std::mt19937_64& rng) const {
  if (draft_tokens.empty()) throw UsageError("sample_refinement: empty draft");
  SampledSequence out;
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, refine_.base.attn, enc.U);
  PreparedKeys draft_keys;
  std::vector<uint8_t> draft_mask(draft_tokens.size(), 1);
  if (config_.use_a3) draft_keys = draft_keys_for(tape, draft_tokens);

  auto state = init_decoder_state(tape, refine_.base, enc.U, enc.ha);
  auto context = make_tensor({config_.width()});
  auto draft_context = make_tensor({config_.word_dim});

  int prev = Vocabulary::kSos;
  for (int t = 0; t < max_len; ++t) {
    auto emb = feedback_embedding(tape, prev);
    auto step = refinement_step(tape, emb, context, draft_context, enc.ha, state, keys, enc.mask,
                                config_.use_a3 ? &draft_keys : nullptr, draft_mask, refine_,
                                proj_, config_.lagged_output_contexts);
    auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                          entry.passage_ext_ids, oov);
    const int token = sample_token(mixed, rng);
    out.ids.push_back(token);
    out.step_nlls.push_back(negative_log_likelihood(tape, mixed, token));
    out.logprob += std::log(std::max(mixed->values[token], kProbFloor));
    state = std::move(step.state);
    context = step.context;
    draft_context = step.draft_context;
    prev = token;
    if (token == Vocabulary::kEos) break;
  }
  return out;
}

BeamResult RefNetModel::beam_search(const EncodeResult& enc, const BatchEntry& entry,
                                    const std::vector<int>& draft_tokens, int beam_size,
                                    int max_len, bool length_normalize) const {
  if (beam_size < 1) throw UsageError("beam_search: beam_size must be >= 1");
  if (draft_tokens.empty()) throw UsageError("beam_search: empty draft");
  Tape* tape = nullptr;
  const int oov = static_cast<int>(entry.oov_tokens.size());
  auto keys = prepare_keys(tape, refine_.base.attn, enc.U);
  PreparedKeys draft_keys;
  std::vector<uint8_t> draft_mask(draft_tokens.size(), 1);
  if (config_.use_a3) draft_keys = draft_keys_for(tape, draft_tokens);

  Hypothesis root;
  root.state = init_decoder_state(tape, refine_.base, enc.U, enc.ha);
  root.context = make_tensor({config_.width()});
  root.draft_context = make_tensor({config_.word_dim});
  root.coverage = init_coverage(enc.U->rows());

  std::vector<Hypothesis> active{std::move(root)};
  std::vector<Hypothesis> finished;

  auto lex_less = [](const std::vector<int>& a, const std::vector<int>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };

  for (int t = 0; t < max_len && !active.empty(); ++t) {
    std::vector<Hypothesis> candidates;
    for (auto& hyp : active) {
      const int prev = hyp.tokens.empty() ? Vocabulary::kSos : hyp.tokens.back();
      auto emb = feedback_embedding(tape, prev);
      auto step = refinement_step(tape, emb, hyp.context, hyp.draft_context, enc.ha, hyp.state,
                                  keys, enc.mask, config_.use_a3 ? &draft_keys : nullptr,
                                  draft_mask, refine_, proj_, config_.lagged_output_contexts);
      auto mixed = copy_mix(tape, step.vocab_dist, step.attn_weights, step.p_gen,
                            entry.passage_ext_ids, oov);

      std::vector<int> order(mixed->size());
      for (int i = 0; i < mixed->size(); ++i) order[i] = i;
      const int take = std::min<int>(beam_size, mixed->size());
      std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
        if (mixed->values[a] != mixed->values[b]) return mixed->values[a] > mixed->values[b];
        return a < b;
      });

      for (int k = 0; k < take; ++k) {
        const int token = order[k];
        if (mixed->values[token] <= 0.0) break;
        Hypothesis next;
        next.tokens = hyp.tokens;
        next.tokens.push_back(token);
        next.logprob = hyp.logprob + std::log(mixed->values[token]);
        next.state = step.state;
        next.context = step.context;
        next.draft_context = step.draft_context;
        next.coverage = advance_coverage(tape, hyp.coverage, step.attn_weights);
        next.finished = token == Vocabulary::kEos;
        candidates.push_back(std::move(next));
      }
    }

    std::sort(candidates.begin(), candidates.end(), [&](const Hypothesis& a, const Hypothesis& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      return lex_less(a.tokens, b.tokens);
    });
    if (static_cast<int>(candidates.size()) > beam_size) candidates.resize(beam_size);

    active.clear();
    for (auto& c : candidates) {
      if (c.finished) {
        finished.push_back(std::move(c));
      } else {
        active.push_back(std::move(c));
      }
    }
  }
  for (auto& h : active) finished.push_back(std::move(h));  // cut off at max_len
  if (finished.empty()) throw NumericError("beam_search: no hypotheses produced");

  auto score = [&](const Hypothesis& h) {
    return length_normalize ? h.logprob / static_cast<double>(h.tokens.size()) : h.logprob;
  };
  const Hypothesis* best = &finished[0];
  for (const auto& h : finished) {
    const double sh = score(h), sb = score(*best);
    if (sh > sb || (sh == sb && lex_less(h.tokens, best->tokens))) best = &h;
  }
  return {best->tokens, best->logprob};
}

AttentionDump RefNetModel::replay_attention(const BatchEntry& entry,
                                            const std::vector<int>& draft_tokens,
                                            const std::vector<int>& refined_tokens) const {
  AttentionDump dump;
  Tape* tape = nullptr;
  auto enc = encode(tape, entry);

  {
    auto keys = prepare_keys(tape, prelim_.attn, enc.U);
    auto state = init_decoder_state(tape, prelim_, enc.U, enc.ha);
    auto context = make_tensor({config_.width()});
    int prev = Vocabulary::kSos;
    for (int token : draft_tokens) {
      auto step = preliminary_step(tape, feedback_embedding(tape, prev), context, enc.ha, state,
                                   keys, enc.mask, prelim_, proj_);
      dump.a1.push_back(tensor_row(step.attn_weights));
      state = std::move(step.state);
      context = step.context;
      prev = token;
    }
  }

  {
    auto keys = prepare_keys(tape, refine_.base.attn, enc.U);
    PreparedKeys draft_keys;
    std::vector<uint8_t> draft_mask(draft_tokens.size(), 1);
    if (config_.use_a3) draft_keys = draft_keys_for(tape, draft_tokens);
    auto state = init_decoder_state(tape, refine_.base, enc.U, enc.ha);
    auto context = make_tensor({config_.width()});
    auto draft_context = make_tensor({config_.word_dim});
    int prev = Vocabulary::kSos;
    for (int token : refined_tokens) {
      auto step = refinement_step(tape, feedback_embedding(tape, prev), context, draft_context,
                                  enc.ha, state, keys, enc.mask,
                                  config_.use_a3 ? &draft_keys : nullptr, draft_mask, refine_,
                                  proj_, config_.lagged_output_contexts);
      dump.a2.push_back(tensor_row(step.attn_weights));
      if (step.draft_weights) dump.a3.push_back(tensor_row(step.draft_weights));
      state = std::move(step.state);
      context = step.context;
      draft_context = step.draft_context;
      prev = token;
    }
  }
  return dump;
}

}  // namespace refnet
