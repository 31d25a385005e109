#pragma once

#include <random>
#include <string>
#include <vector>

#include "refnet/data.hpp"
#include "refnet/ops.hpp"
#include "refnet/param.hpp"

namespace refnet {

struct EmbeddingConfig {
  int word_dim = 300;
  int char_dim = 20;
  int char_proj_dim = 100;
  int tag_dim = 3;
  int pos_dim = 16;
  int pos_clip = 10;
  bool use_char = true;
  bool use_tag = true;
  bool use_pos = true;
};

// Word / character / answer-tag / position lookup tables. The PAD word row is
// zero and frozen; rows loaded from an embedding file are frozen too, while
// tokens absent from the file stay randomly initialized and trainable.
// Ablation switches (use_char/use_tag/use_pos) zero the corresponding
// sub-vector without changing dimensions.
class EmbeddingTables {
 public:
  EmbeddingTables(ParameterStore& store, const EmbeddingConfig& config, int vocab_size,
                  std::mt19937_64& rng);

  const EmbeddingConfig& config() const { return config_; }
  int passage_dim() const;  // word + char_proj + tag + pos
  int answer_dim() const;   // word + char_proj
  int word_dim() const { return config_.word_dim; }

  // Glove text format: token then word_dim whitespace-separated reals per
  // line. Returns the number of vocabulary rows loaded (and frozen).
  int load_word_file(const std::string& path, const Vocabulary& vocab);

  TensorPtr word_embed(Tape* tape, int id) const;
  // Per-character rows, elementwise max-pool, linear projection.
  TensorPtr char_embed(Tape* tape, const std::vector<int>& char_ids) const;
  TensorPtr char_embed(Tape* tape, const std::string& token) const;

  TensorPtr passage_token_embed(Tape* tape, int word_id, const std::vector<int>& char_ids,
                                int tag_id, int distance) const;
  TensorPtr answer_token_embed(Tape* tape, int word_id, const std::vector<int>& char_ids) const;

  // Zeroes gradients of frozen word rows (and PAD); call between backward()
  // and the optimizer step.
  void apply_freeze();

  TensorPtr word_table() const { return word_; }
  int frozen_row_count() const;

 private:
  EmbeddingConfig config_;
  TensorPtr word_;       // [vocab, word_dim]
  TensorPtr char_;       // [char_inventory, char_dim]
  TensorPtr char_proj_;  // [char_proj_dim, char_dim]
  TensorPtr tag_;        // [3, tag_dim]
  TensorPtr pos_;        // [2*clip+1, pos_dim]
  std::vector<uint8_t> word_row_frozen_;
};

// m x d matrix of passage token embeddings for one example.
TensorPtr embed_passage(Tape* tape, const BatchEntry& entry, const EmbeddingTables& tables);

}  // namespace refnet
