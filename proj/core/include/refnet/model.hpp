#pragma once

#include <random>

#include "refnet/decoder.hpp"
#include "refnet/encoder.hpp"

namespace refnet {

struct ModelConfig {
  int word_dim = 300;
  int char_dim = 20;
  int char_proj_dim = 100;
  int tag_dim = 3;
  int pos_dim = 16;
  int pos_clip = 10;
  int hidden_per_dir = 512;  // l = 2 * hidden_per_dir
  int enc_layers = 2;
  int dec_layers = 2;
  int att_dim = 0;  // 0 -> l
  bool use_char = true;
  bool use_tag = true;
  bool use_pos = true;
  bool use_a3 = true;
  // The printed recurrence feeds c_{t-1}, g_{t-1} to the output projection;
  // false switches to c_t, g_t.
  bool lagged_output_contexts = true;

  int width() const { return 2 * hidden_per_dir; }
  int attention_dim() const { return att_dim > 0 ? att_dim : width(); }
};

enum class DecodeMode { Greedy, Sample };

struct ForcedPass {
  std::vector<TensorPtr> step_nlls;
  std::vector<TensorPtr> mixed_dists;  // copy-mixed extended distributions
  std::vector<TensorPtr> vocab_dists;  // pre-mix distributions
  TensorPtr coverage_penalty;          // scalar
  int steps = 0;
};

struct SampledSequence {
  std::vector<int> ids;  // extended ids as emitted
  std::vector<TensorPtr> step_nlls;
  double logprob = 0.0;
};

struct BeamResult {
  std::vector<int> tokens;
  double logprob = 0.0;  // raw sum of per-token log-probs
};

struct AttentionDump {
  std::vector<std::vector<double>> a1;  // draft step x passage position
  std::vector<std::vector<double>> a2;  // refined step x passage position
  std::vector<std::vector<double>> a3;  // refined step x draft position
};

// The full two-pass question generation model: shared encoder, preliminary
// decoder (A1), refinement decoder (dual attention A2 + A3), shared output
// matrix W_o, pointer/coverage on both passage attentions.
class RefNetModel {
 public:
  RefNetModel(const ModelConfig& config, int vocab_size, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  EmbeddingTables& tables() { return *tables_; }
  const EmbeddingTables& tables() const { return *tables_; }
  const OutputProjection& projection() const { return proj_; }

  // Parameter-name predicate for the reward-fine-tuning freeze: the
  // preliminary decoder is the REINFORCE baseline and stays fixed.
  static bool is_preliminary_exclusive(const std::string& name);

  EncodeResult encode(Tape* tape, const BatchEntry& entry,
                      bool zero_answer_vector = false) const;

  ForcedPass forced_preliminary(Tape* tape, const EncodeResult& enc,
                                const BatchEntry& entry) const;
  ForcedPass forced_refinement(Tape* tape, const EncodeResult& enc, const BatchEntry& entry,
                               const std::vector<int>& draft_tokens) const;

  // Value-only greedy/sampled first pass; gradients never flow through the
  // discrete token choices (the refinement pass re-embeds the tokens).
  Draft decode_draft(DecodeMode mode, const EncodeResult& enc, const BatchEntry& entry,
                     int max_len, std::mt19937_64* rng = nullptr) const;

  Draft greedy_refinement(const EncodeResult& enc, const BatchEntry& entry,
                          const std::vector<int>& draft_tokens, int max_len) const;

  SampledSequence sample_refinement(Tape* tape, const EncodeResult& enc, const BatchEntry& entry,
                                    const std::vector<int>& draft_tokens, int max_len,
                                    std::mt19937_64& rng) const;

  BeamResult beam_search(const EncodeResult& enc, const BatchEntry& entry,
                         const std::vector<int>& draft_tokens, int beam_size, int max_len,
                         bool length_normalize = true) const;

  // Re-runs both decoders over fixed token sequences to capture the A1/A2/A3
  // weights for analysis dumps.
  AttentionDump replay_attention(const BatchEntry& entry, const std::vector<int>& draft_tokens,
                                 const std::vector<int>& refined_tokens) const;

 private:
  TensorPtr feedback_embedding(Tape* tape, int token_id) const;
  PreparedKeys draft_keys_for(Tape* tape, const std::vector<int>& draft_tokens) const;

  ModelConfig config_;
  int vocab_size_ = 0;
  ParameterStore store_;
  std::unique_ptr<EmbeddingTables> tables_;
  EncoderParams encoder_;
  DecoderParams prelim_;
  RefinementParams refine_;
  OutputProjection proj_;
};

}  // namespace refnet
