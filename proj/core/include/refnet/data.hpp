#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refnet/vocab.hpp"

namespace refnet {

// One (passage, answer, question) triple. Tokens are lowercased; the raw
// originals are retained for capitalization-based named-entity detection.
struct Example {
  std::string id;
  std::vector<std::string> passage_tokens;
  std::vector<std::string> passage_raw;
  bool has_span = false;
  int span_start = 0;  // token index of the first answer token
  int span_len = 0;
  std::vector<std::string> answer_tokens;
  std::vector<std::string> question_tokens;
  std::vector<std::string> question_raw;
};

struct CorpusSplit {
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
  std::string provenance;
};

// Lowercase, split on whitespace; punctuation becomes its own token.
// raw_out, when given, receives the original-case tokens in parallel.
std::vector<std::string> tokenize(const std::string& text,
                                  std::vector<std::string>* raw_out = nullptr);

struct SquadLoadResult {
  std::vector<Example> examples;
  int skipped = 0;  // answers whose char offset did not align to a token
};

// SQuAD v1.1 schema: data -> paragraphs -> context + qas. Malformed JSON or
// a missing field throws ParseError carrying the path.
SquadLoadResult load_squad_json(const std::string& path);

// JSON-lines corpus, one object per line:
//   {id, passage, answer, answer_start_token, answer_len, question}
// answer_start_token == -1 means the answer is not a passage span.
std::vector<Example> load_jsonl_corpus(const std::string& path);
void save_jsonl_corpus(const std::string& path, const std::vector<Example>& examples);

// Top-`cap` tokens by frequency over passages + questions; ties break
// lexicographically; reserved ids prepended.
Vocabulary build_vocab(const std::vector<Example>& examples, int cap);

inline constexpr int kDefaultVocabCap = 30000;

// B/I/O answer tags plus a signed token distance to the nearest span token,
// clipped to [-clip, clip]. Tag ids: B=0, I=1, O=2. Without a span every
// tag is O and every distance sits at +clip.
struct AnswerTags {
  std::vector<int> bio;
  std::vector<int> distance;  // signed, in [-clip, clip]
};
AnswerTags tag_answer(const Example& ex, int clip);

inline constexpr int kTagB = 0;
inline constexpr int kTagI = 1;
inline constexpr int kTagO = 2;

// Character inventory for the char embedding: id 0 is the unknown-char row.
int char_id(char c);
int char_inventory_size();
std::vector<int> token_char_ids(const std::string& token);

// Per-example id views plus the padded batch layout. Extended ids place each
// out-of-vocabulary passage token at vocab_size + (index in oov_tokens).
struct BatchEntry {
  std::string id;
  std::vector<std::string> passage_tokens;
  std::vector<std::string> passage_raw;
  std::vector<std::string> question_tokens;
  std::vector<int> passage_ids;
  std::vector<int> passage_ext_ids;
  std::vector<std::string> oov_tokens;
  std::vector<int> tag_ids;
  std::vector<int> distance;  // signed
  std::vector<std::vector<int>> passage_char_ids;
  bool has_span = false;
  int span_start = 0;
  int span_len = 0;
  std::vector<int> answer_ids;
  std::vector<std::vector<int>> answer_char_ids;
  std::vector<int> question_input_ids;   // SOS + gold (plain ids)
  std::vector<int> question_target_ids;  // gold extended ids + EOS
};

struct Batch {
  std::vector<BatchEntry> entries;
  int max_passage_len = 0;
  int max_question_len = 0;  // of target rows
  // Padded matrices; PAD fills unused positions and is masked out downstream.
  std::vector<std::vector<int>> passage_ids;
  std::vector<std::vector<int>> passage_ext_ids;
  std::vector<std::vector<int>> tag_ids;
  std::vector<std::vector<int>> question_input_ids;
  std::vector<std::vector<int>> question_target_ids;
  std::vector<int> passage_lengths;
};

struct MaxLens {
  int passage = 200;
  int question = 30;
};

struct BatchingResult {
  std::vector<Batch> batches;
  int truncated_passages = 0;
  int dropped_questions = 0;
};

BatchEntry make_batch_entry(const Example& ex, const Vocabulary& vocab, int pos_clip);

// Buckets by passage length to minimize padding. Examples with questions
// longer than max.question are dropped (counted); long passages truncated.
BatchingResult make_batches(const std::vector<Example>& examples, const Vocabulary& vocab,
                            int batch_size, const MaxLens& max_lens, int pos_clip);

// Maps decoded (possibly extended) ids back to tokens through the entry's
// OOV list.
std::string extended_id_to_token(int id, const Vocabulary& vocab, const BatchEntry& entry);
std::vector<std::string> ids_to_tokens(const std::vector<int>& ids, const Vocabulary& vocab,
                                       const BatchEntry& entry, bool strip_terminators = true);

}  // namespace refnet
