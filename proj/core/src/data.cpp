#include "refnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "refnet/error.hpp"

namespace refnet {

using nlohmann::json;

std::vector<std::string> tokenize(const std::string& text, std::vector<std::string>* raw_out) {
  std::vector<std::string> out;
  std::string cur_low, cur_raw;
  auto flush = [&] {
    if (!cur_low.empty()) {
      out.push_back(cur_low);
      if (raw_out) raw_out->push_back(cur_raw);
      cur_low.clear();
      cur_raw.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.push_back(std::string(1, static_cast<char>(std::tolower(c))));
      if (raw_out) raw_out->push_back(std::string(1, static_cast<char>(c)));
    } else {
      cur_low.push_back(static_cast<char>(std::tolower(c)));
      cur_raw.push_back(static_cast<char>(c));
    }
  }
  flush();
  return out;
}

namespace {

// Tokenizes while keeping each token's character span in the source string,
// so SQuAD answer offsets can be aligned to token indices.
struct SpannedToken {
  std::string lower;
  std::string raw;
  int begin = 0;
  int end = 0;  // exclusive
};

std::vector<SpannedToken> tokenize_with_spans(const std::string& text) {
  std::vector<SpannedToken> out;
  SpannedToken cur;
  bool open = false;
  auto flush = [&](int end) {
    if (open) {
      cur.end = end;
      out.push_back(cur);
      cur = SpannedToken{};
      open = false;
    }
  };
  for (int i = 0; i < static_cast<int>(text.size()); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush(i);
    } else if (std::ispunct(c)) {
      flush(i);
      out.push_back({std::string(1, static_cast<char>(std::tolower(c))),
                     std::string(1, static_cast<char>(c)), i, i + 1});
    } else {
      if (!open) {
        cur.begin = i;
        open = true;
      }
      cur.lower.push_back(static_cast<char>(std::tolower(c)));
      cur.raw.push_back(static_cast<char>(c));
    }
  }
  flush(static_cast<int>(text.size()));
  return out;
}

}  // namespace

SquadLoadResult load_squad_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_squad_json: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("load_squad_json: malformed JSON in " + path + ": " + e.what());
  }

  SquadLoadResult result;
  try {
    for (const auto& article : doc.at("data")) {
      for (const auto& para : article.at("paragraphs")) {
        const std::string context = para.at("context").get<std::string>();
        auto spanned = tokenize_with_spans(context);
        for (const auto& qa : para.at("qas")) {
          Example ex;
          ex.id = qa.at("id").get<std::string>();
          for (const auto& t : spanned) {
            ex.passage_tokens.push_back(t.lower);
            ex.passage_raw.push_back(t.raw);
          }
          ex.question_tokens = tokenize(qa.at("question").get<std::string>(), &ex.question_raw);

          const auto& answers = qa.at("answers");
          if (answers.empty()) continue;
          const std::string answer_text = answers[0].at("text").get<std::string>();
          const int answer_start = answers[0].at("answer_start").get<int>();
          ex.answer_tokens = tokenize(answer_text);
          if (ex.answer_tokens.empty() || ex.question_tokens.empty() ||
              ex.passage_tokens.empty()) {
            ++result.skipped;
            continue;
          }

          int start_tok = -1;
          for (size_t i = 0; i < spanned.size(); ++i) {
            if (spanned[i].begin <= answer_start && answer_start < spanned[i].end) {
              start_tok = static_cast<int>(i);
              break;
            }
          }
          bool aligned = start_tok >= 0 &&
                         start_tok + ex.answer_tokens.size() <= spanned.size();
          if (aligned) {
            for (size_t k = 0; k < ex.answer_tokens.size(); ++k) {
              if (spanned[start_tok + k].lower != ex.answer_tokens[k]) {
                aligned = false;
                break;
              }
            }
          }
          if (!aligned) {
            std::cerr << "load_squad_json: skipping " << ex.id
                      << " (answer offset not alignable to token boundary)\n";
            ++result.skipped;
            continue;
          }
          ex.has_span = true;
          ex.span_start = start_tok;
          ex.span_len = static_cast<int>(ex.answer_tokens.size());
          result.examples.push_back(std::move(ex));
        }
      }
    }
  } catch (const json::exception& e) {
    throw ParseError("load_squad_json: unexpected schema in " + path + ": " + e.what());
  }
  return result;
}

std::vector<Example> load_jsonl_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_jsonl_corpus: cannot open " + path);
  std::vector<Example> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("load_jsonl_corpus: " + path + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
    Example ex;
    ex.id = rec.value("id", "line-" + std::to_string(line_no));
    ex.passage_tokens = tokenize(rec.at("passage").get<std::string>(), &ex.passage_raw);
    ex.answer_tokens = tokenize(rec.value("answer", ""));
    if (rec.contains("question")) {
      ex.question_tokens = tokenize(rec.at("question").get<std::string>(), &ex.question_raw);
    }
    const int start = rec.value("answer_start_token", -1);
    const int len = rec.value("answer_len", static_cast<int>(ex.answer_tokens.size()));
    if (start >= 0) {
      if (start + len > static_cast<int>(ex.passage_tokens.size())) {
        throw DataError("load_jsonl_corpus: answer span out of bounds in example " + ex.id);
      }
      ex.has_span = true;
      ex.span_start = start;
      ex.span_len = len;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_jsonl_corpus(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  if (!out) throw DataError("save_jsonl_corpus: cannot write " + path);
  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (size_t i = 0; i < toks.size(); ++i) {
      if (i) s += " ";
      s += toks[i];
    }
    return s;
  };
  for (const auto& ex : examples) {
    json rec{{"id", ex.id},
             {"passage", join(ex.passage_tokens)},
             {"answer", join(ex.answer_tokens)},
             {"answer_start_token", ex.has_span ? ex.span_start : -1},
             {"answer_len", ex.has_span ? ex.span_len : 0},
             {"question", join(ex.question_tokens)}};
    out << rec.dump() << "\n";
  }
}

Vocabulary build_vocab(const std::vector<Example>& examples, int cap) {
  if (cap < 1) throw UsageError("build_vocab: cap must be >= 1");
  std::map<std::string, long> counts;  // ordered: lexicographic tie-break for free
  for (const auto& ex : examples) {
    for (const auto& t : ex.passage_tokens) ++counts[t];
    for (const auto& t : ex.question_tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : items) {
    (void)n;
    if (v.size() - Vocabulary::kReserved >= cap) break;
    v.add(tok);
  }
  return v;
}

AnswerTags tag_answer(const Example& ex, int clip) {
  const int m = static_cast<int>(ex.passage_tokens.size());
  AnswerTags tags;
  tags.bio.assign(m, kTagO);
  tags.distance.assign(m, clip);
  if (!ex.has_span) return tags;
  if (ex.span_start < 0 || ex.span_len < 1 || ex.span_start + ex.span_len > m) {
    throw DataError("tag_answer: span out of bounds in example " + ex.id);
  }
  for (int i = 0; i < m; ++i) {
    if (i == ex.span_start) {
      tags.bio[i] = kTagB;
      tags.distance[i] = 0;
    } else if (i > ex.span_start && i < ex.span_start + ex.span_len) {
      tags.bio[i] = kTagI;
      tags.distance[i] = 0;
    } else {
      int d = i < ex.span_start ? i - ex.span_start : i - (ex.span_start + ex.span_len - 1);
      tags.distance[i] = std::clamp(d, -clip, clip);
    }
  }
  return tags;
}

namespace {
const std::string kCharInventory =
    "abcdefghijklmnopqrstuvwxyz0123456789!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
}

int char_id(char c) {
  auto pos = kCharInventory.find(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return pos == std::string::npos ? 0 : static_cast<int>(pos) + 1;
}

int char_inventory_size() { return static_cast<int>(kCharInventory.size()) + 1; }

std::vector<int> token_char_ids(const std::string& token) {
  std::vector<int> ids;
  ids.reserve(token.size());
  for (char c : token) ids.push_back(char_id(c));
  if (ids.empty()) ids.push_back(0);
  return ids;
}

BatchEntry make_batch_entry(const Example& ex, const Vocabulary& vocab, int pos_clip) {
  BatchEntry e;
  e.id = ex.id;
  e.passage_tokens = ex.passage_tokens;
  e.passage_raw = ex.passage_raw;
  e.question_tokens = ex.question_tokens;
  e.has_span = ex.has_span;
  e.span_start = ex.span_start;
  e.span_len = ex.span_len;

  for (const auto& tok : ex.passage_tokens) {
    int id = vocab.id(tok);
    e.passage_ids.push_back(id);
    if (id == Vocabulary::kUnk) {
      int oov_idx = -1;
      for (size_t k = 0; k < e.oov_tokens.size(); ++k) {
        if (e.oov_tokens[k] == tok) {
          oov_idx = static_cast<int>(k);
          break;
        }
      }
      if (oov_idx < 0) {
        oov_idx = static_cast<int>(e.oov_tokens.size());
        e.oov_tokens.push_back(tok);
      }
      e.passage_ext_ids.push_back(vocab.size() + oov_idx);
    } else {
      e.passage_ext_ids.push_back(id);
    }
    e.passage_char_ids.push_back(token_char_ids(tok));
  }

  auto tags = tag_answer(ex, pos_clip);
  e.tag_ids = tags.bio;
  e.distance = tags.distance;

  for (const auto& tok : ex.answer_tokens) {
    e.answer_ids.push_back(vocab.id(tok));
    e.answer_char_ids.push_back(token_char_ids(tok));
  }

  e.question_input_ids.push_back(Vocabulary::kSos);
  for (const auto& tok : ex.question_tokens) {
    int id = vocab.id(tok);
    e.question_input_ids.push_back(id);
    if (id == Vocabulary::kUnk) {
      int ext = Vocabulary::kUnk;
      for (size_t k = 0; k < e.oov_tokens.size(); ++k) {
        if (e.oov_tokens[k] == tok) {
          ext = vocab.size() + static_cast<int>(k);
          break;
        }
      }
      e.question_target_ids.push_back(ext);
    } else {
      e.question_target_ids.push_back(id);
    }
  }
  e.question_target_ids.push_back(Vocabulary::kEos);
  return e;
}

BatchingResult make_batches(const std::vector<Example>& examples, const Vocabulary& vocab,
                            int batch_size, const MaxLens& max_lens, int pos_clip) {
  if (batch_size < 1) throw UsageError("make_batches: batch_size must be >= 1");
  BatchingResult result;

  std::vector<Example> kept;
  kept.reserve(examples.size());
  for (const auto& ex : examples) {
    if (static_cast<int>(ex.question_tokens.size()) > max_lens.question) {
      ++result.dropped_questions;
      continue;
    }
    Example copy = ex;
    if (static_cast<int>(copy.passage_tokens.size()) > max_lens.passage) {
      ++result.truncated_passages;
      copy.passage_tokens.resize(max_lens.passage);
      copy.passage_raw.resize(std::min(copy.passage_raw.size(),
                                       static_cast<size_t>(max_lens.passage)));
      if (copy.has_span && copy.span_start + copy.span_len > max_lens.passage) {
        copy.has_span = false;  // span fell off the truncated tail
        copy.span_start = 0;
        copy.span_len = 0;
      }
    }
    kept.push_back(std::move(copy));
  }

  // Bucket by passage length; ties keep input order (stable) for determinism.
  std::vector<size_t> order(kept.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return kept[a].passage_tokens.size() < kept[b].passage_tokens.size();
  });

  for (size_t pos = 0; pos < order.size(); pos += batch_size) {
    Batch batch;
    size_t end = std::min(order.size(), pos + batch_size);
    for (size_t k = pos; k < end; ++k) {
      batch.entries.push_back(make_batch_entry(kept[order[k]], vocab, pos_clip));
    }
    for (const auto& e : batch.entries) {
      batch.max_passage_len =
          std::max(batch.max_passage_len, static_cast<int>(e.passage_ids.size()));
      batch.max_question_len =
          std::max(batch.max_question_len, static_cast<int>(e.question_target_ids.size()));
    }
    for (const auto& e : batch.entries) {
      auto pad_row = [](std::vector<int> v, int len, int fill) {
        v.resize(len, fill);
        return v;
      };
      batch.passage_lengths.push_back(static_cast<int>(e.passage_ids.size()));
      batch.passage_ids.push_back(pad_row(e.passage_ids, batch.max_passage_len, Vocabulary::kPad));
      batch.passage_ext_ids.push_back(
          pad_row(e.passage_ext_ids, batch.max_passage_len, Vocabulary::kPad));
      batch.tag_ids.push_back(pad_row(e.tag_ids, batch.max_passage_len, kTagO));
      batch.question_input_ids.push_back(
          pad_row(e.question_input_ids, batch.max_question_len, Vocabulary::kPad));
      batch.question_target_ids.push_back(
          pad_row(e.question_target_ids, batch.max_question_len, Vocabulary::kPad));
    }
    result.batches.push_back(std::move(batch));
  }
  return result;
}

std::string extended_id_to_token(int id, const Vocabulary& vocab, const BatchEntry& entry) {
  if (id < vocab.size()) return vocab.token(id);
  int oov = id - vocab.size();
  if (oov >= static_cast<int>(entry.oov_tokens.size())) {
    throw UsageError("extended_id_to_token: id " + std::to_string(id) +
                     " beyond extended vocabulary of example " + entry.id);
  }
  return entry.oov_tokens[oov];
}

std::vector<std::string> ids_to_tokens(const std::vector<int>& ids, const Vocabulary& vocab,
                                       const BatchEntry& entry, bool strip_terminators) {
  std::vector<std::string> out;
  for (int id : ids) {
    if (strip_terminators &&
        (id == Vocabulary::kEos || id == Vocabulary::kSos || id == Vocabulary::kPad)) {
      continue;
    }
    out.push_back(extended_id_to_token(id, vocab, entry));
  }
  return out;
}

}  // namespace refnet
