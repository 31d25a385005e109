#include "refnet/embedding.hpp"

#include <fstream>
#include <sstream>

#include "refnet/error.hpp"

namespace refnet {

EmbeddingTables::EmbeddingTables(ParameterStore& store, const EmbeddingConfig& config,
                                 int vocab_size, std::mt19937_64& rng)
    : config_(config) {
  word_ = store.create("embed.word", {vocab_size, config.word_dim}, {Init::UniformFanIn}, rng);
  char_ = store.create("embed.char", {char_inventory_size(), config.char_dim},
                       {Init::UniformFanIn}, rng);
  char_proj_ = store.create("embed.char_proj", {config.char_proj_dim, config.char_dim},
                            {Init::UniformFanIn}, rng);
  tag_ = store.create("embed.tag", {3, config.tag_dim}, {Init::UniformFanIn}, rng);
  pos_ = store.create("embed.pos", {2 * config.pos_clip + 1, config.pos_dim},
                      {Init::UniformFanIn}, rng);
  word_row_frozen_.assign(vocab_size, 0);
  // PAD row stays zero and frozen.
  for (int j = 0; j < config.word_dim; ++j) word_->at(Vocabulary::kPad, j) = 0.0;
  word_row_frozen_[Vocabulary::kPad] = 1;
}

int EmbeddingTables::passage_dim() const {
  return config_.word_dim + config_.char_proj_dim + config_.tag_dim + config_.pos_dim;
}

int EmbeddingTables::answer_dim() const { return config_.word_dim + config_.char_proj_dim; }

int EmbeddingTables::load_word_file(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("EmbeddingTables: cannot open embedding file " + path);
  std::string line;
  int loaded = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    if (!vocab.contains(token)) continue;
    const int id = vocab.id(token);
    if (id == Vocabulary::kPad) continue;
    for (int j = 0; j < config_.word_dim; ++j) {
      double v;
      if (!(ss >> v)) {
        throw ParseError("EmbeddingTables: " + path + ":" + std::to_string(line_no) +
                         ": expected " + std::to_string(config_.word_dim) + " values");
      }
      word_->at(id, j) = v;
    }
    word_row_frozen_[id] = 1;
    ++loaded;
  }
  return loaded;
}

TensorPtr EmbeddingTables::word_embed(Tape* tape, int id) const {
  return embedding_lookup(tape, word_, id);
}

TensorPtr EmbeddingTables::char_embed(Tape* tape, const std::vector<int>& char_ids) const {
  if (char_ids.empty()) throw UsageError("char_embed: token must be nonempty");
  if (!config_.use_char) return make_tensor({config_.char_proj_dim});
  std::vector<TensorPtr> rows;
  rows.reserve(char_ids.size());
  for (int cid : char_ids) rows.push_back(embedding_lookup(tape, char_, cid));
  auto pooled = max_rows(tape, stack_rows(tape, rows));
  return matmul(tape, char_proj_, pooled);
}

TensorPtr EmbeddingTables::char_embed(Tape* tape, const std::string& token) const {
  return char_embed(tape, token_char_ids(token));
}

TensorPtr EmbeddingTables::passage_token_embed(Tape* tape, int word_id,
                                               const std::vector<int>& char_ids, int tag_id,
                                               int distance) const {
  auto w = word_embed(tape, word_id);
  auto c = char_embed(tape, char_ids);
  auto t = config_.use_tag ? embedding_lookup(tape, tag_, tag_id)
                           : make_tensor({config_.tag_dim});
  auto p = config_.use_pos ? embedding_lookup(tape, pos_, distance + config_.pos_clip)
                           : make_tensor({config_.pos_dim});
  return concat(tape, {w, c, t, p});
}

TensorPtr EmbeddingTables::answer_token_embed(Tape* tape, int word_id,
                                              const std::vector<int>& char_ids) const {
  return concat(tape, {word_embed(tape, word_id), char_embed(tape, char_ids)});
}

void EmbeddingTables::apply_freeze() {
  if (word_->grad.empty()) return;
  const int d = config_.word_dim;
  for (int r = 0; r < word_->rows(); ++r) {
    if (!word_row_frozen_[r]) continue;
    for (int j = 0; j < d; ++j) word_->grad[static_cast<size_t>(r) * d + j] = 0.0;
  }
}

int EmbeddingTables::frozen_row_count() const {
  int n = 0;
  for (uint8_t f : word_row_frozen_) n += f;
  return n;
}

TensorPtr embed_passage(Tape* tape, const BatchEntry& entry, const EmbeddingTables& tables) {
  const int m = static_cast<int>(entry.passage_ids.size());
  if (m == 0) throw UsageError("embed_passage: empty passage");
  std::vector<TensorPtr> rows;
  rows.reserve(m);
  for (int i = 0; i < m; ++i) {
    rows.push_back(tables.passage_token_embed(tape, entry.passage_ids[i],
                                              entry.passage_char_ids[i], entry.tag_ids[i],
                                              entry.distance[i]));
  }
  return stack_rows(tape, rows);
}

}  // namespace refnet
