#include "refnet/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "refnet/data.hpp"
#include "refnet/error.hpp"

namespace refnet {

using nlohmann::json;

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& toks, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
  }
  return counts;
}

struct OrderStats {
  long clipped = 0;
  long total = 0;
};

OrderStats order_stats(const Tokens& candidate, const std::vector<Tokens>& references, int k) {
  OrderStats s;
  auto cand = ngram_counts(candidate, k);
  for (const auto& [gram, cnt] : cand) {
    int best = 0;
    for (const auto& ref : references) {
      auto rc = ngram_counts(ref, k);
      auto it = rc.find(gram);
      if (it != rc.end()) best = std::max(best, it->second);
    }
    s.clipped += std::min(cnt, best);
    s.total += cnt;
  }
  return s;
}

int closest_ref_length(int c, const std::vector<Tokens>& references) {
  int best = static_cast<int>(references[0].size());
  for (const auto& ref : references) {
    int r = static_cast<int>(ref.size());
    if (std::abs(r - c) < std::abs(best - c) || (std::abs(r - c) == std::abs(best - c) && r < best)) {
      best = r;
    }
  }
  return best;
}

double geometric_mean_precisions(const Tokens& candidate, const std::vector<Tokens>& references,
                                 int n, bool smoothing) {
  double log_sum = 0.0;
  int orders = 0;
  for (int k = 1; k <= n; ++k) {
    auto s = order_stats(candidate, references, k);
    if (s.total == 0) continue;  // candidate shorter than k: order skipped
    double p;
    if (s.clipped == 0 && smoothing && k >= 2) {
      p = 1.0 / static_cast<double>(s.total + 1);
    } else {
      p = static_cast<double>(s.clipped) / static_cast<double>(s.total);
    }
    if (p == 0.0) return 0.0;
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;
  return std::exp(log_sum / orders);
}

}  // namespace

double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references, int n,
              bool smoothing) {
  if (n < 1 || n > 4) throw UsageError("bleu_n: n must be in 1..4");
  if (references.empty()) throw UsageError("bleu_n: references must be nonempty");
  if (candidate.empty()) return 0.0;
  const double gm = geometric_mean_precisions(candidate, references, n, smoothing);
  if (gm == 0.0) return 0.0;
  const int c = static_cast<int>(candidate.size());
  const int r = closest_ref_length(c, references);
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / c) : 1.0;
  return bp * gm;
}

double passage_overlap_bleu2(const Tokens& candidate, const Tokens& passage) {
  if (candidate.empty() || passage.empty()) return 0.0;
  return geometric_mean_precisions(candidate, {passage}, 2, /*smoothing=*/true);
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const size_t m = candidate.size(), n = reference.size();
  std::vector<std::vector<int>> dp(m + 1, std::vector<int>(n + 1, 0));
  for (size_t i = 1; i <= m; ++i) {
    for (size_t j = 1; j <= n; ++j) {
      dp[i][j] = candidate[i - 1] == reference[j - 1] ? dp[i - 1][j - 1] + 1
                                                      : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  const int lcs = dp[m][n];
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / m;
  const double r = static_cast<double>(lcs) / n;
  const double b2 = beta * beta;
  return ((1.0 + b2) * p * r) / (r + b2 * p);
}

namespace {

// Closed-class words; wh-words included so a mid-sentence "what" counts as a
// function word rather than an important word.
const std::unordered_set<std::string> kFunctionWords = {
    "a",     "an",    "the",   "of",    "in",    "on",    "at",    "to",   "for",  "from",
    "by",    "with",  "about", "as",    "into",  "over",  "under", "and",  "or",   "but",
    "nor",   "so",    "yet",   "if",    "then",  "than",  "that",  "this", "these", "those",
    "is",    "are",   "was",   "were",  "be",    "been",  "being", "am",   "do",   "does",
    "did",   "have",  "has",   "had",   "can",   "could", "will",  "would", "shall", "should",
    "may",   "might", "must",  "it",    "its",   "he",    "she",   "his",  "her",  "him",
    "they",  "them",  "their", "we",    "us",    "our",   "you",   "your", "i",    "me",
    "my",    "who",   "whom",  "whose", "what",  "which", "when",  "where", "why",  "how",
    "not",   "no",    "there", "here",  "up",    "down",  "out",   "off",  "s",    "t",
    "?",     ".",     ",",     "!",     ";",     ":",     "'",     "\""};

bool has_digit(const std::string& t) {
  return std::any_of(t.begin(), t.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_capitalized(const std::string& raw) {
  return !raw.empty() && std::isupper(static_cast<unsigned char>(raw[0])) != 0;
}

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

double multiset_f1(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() && ref.empty()) return 1.0;
  if (cand.empty() || ref.empty()) return 0.0;
  std::map<std::string, int> cc, rc;
  for (const auto& t : cand) ++cc[t];
  for (const auto& t : ref) ++rc[t];
  long overlap = 0;
  for (const auto& [t, n] : cc) {
    auto it = rc.find(t);
    if (it != rc.end()) overlap += std::min(n, it->second);
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / cand.size();
  const double r = static_cast<double>(overlap) / ref.size();
  return 2.0 * p * r / (p + r);
}

enum class WordClass { NamedEntity, Function, Important };

std::vector<std::vector<std::string>> classify(const Tokens& tokens, size_t from,
                                               const std::set<std::string>& ne_forms) {
  std::vector<std::vector<std::string>> buckets(3);
  for (size_t i = from; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    WordClass cls;
    if (ne_forms.count(t) || has_digit(t)) {
      cls = WordClass::NamedEntity;
    } else if (kFunctionWords.count(t)) {
      cls = WordClass::Function;
    } else {
      cls = WordClass::Important;
    }
    buckets[static_cast<size_t>(cls)].push_back(t);
  }
  return buckets;
}

}  // namespace

bool is_function_word(const std::string& token) { return kFunctionWords.count(token) > 0; }

AnswerabilityResult answerability_score(const Tokens& candidate, const Tokens& reference,
                                        const Tokens& reference_raw, const Tokens& passage_raw,
                                        const AnswerabilityWeights& weights,
                                        const std::set<std::string>* gazetteer) {
  const double wsum =
      weights.named_entity + weights.important + weights.function_words + weights.question_type;
  if (weights.named_entity < 0 || weights.important < 0 || weights.function_words < 0 ||
      weights.question_type < 0 || std::fabs(wsum - 1.0) > 1e-9) {
    throw UsageError("answerability_score: weights must be nonnegative and sum to 1");
  }
  if (reference.empty()) throw UsageError("answerability_score: reference must be nonempty");

  std::set<std::string> ne_forms;
  auto harvest = [&](const Tokens& raw, size_t from) {
    for (size_t i = from; i < raw.size(); ++i) {
      if (is_capitalized(raw[i]) || has_digit(raw[i])) ne_forms.insert(lower(raw[i]));
    }
  };
  harvest(reference_raw, 1);  // position 0 is the question-type slot
  harvest(passage_raw, 0);
  if (gazetteer) {
    for (const auto& t : *gazetteer) ne_forms.insert(lower(t));
  }

  auto cand_buckets = classify(candidate, 1, ne_forms);
  auto ref_buckets = classify(reference, 1, ne_forms);

  AnswerabilityResult out;
  out.components.named_entity = multiset_f1(cand_buckets[0], ref_buckets[0]);
  out.components.function_words = multiset_f1(cand_buckets[1], ref_buckets[1]);
  out.components.important = multiset_f1(cand_buckets[2], ref_buckets[2]);
  out.components.question_type =
      (!candidate.empty() && candidate[0] == reference[0]) ? 1.0 : 0.0;
  out.score = weights.named_entity * out.components.named_entity +
              weights.important * out.components.important +
              weights.function_words * out.components.function_words +
              weights.question_type * out.components.question_type;
  return out;
}

double qbleu4(const Tokens& candidate, const Tokens& reference, const Tokens& reference_raw,
              const Tokens& passage_raw, double delta, const AnswerabilityWeights& weights,
              const std::set<std::string>* gazetteer) {
  if (delta < 0.0 || delta > 1.0) throw UsageError("qbleu4: delta must be in [0, 1]");
  const double ans =
      answerability_score(candidate, reference, reference_raw, passage_raw, weights, gazetteer)
          .score;
  const double bleu = bleu_n(candidate, {reference}, 4, /*smoothing=*/true);
  return delta * ans + (1.0 - delta) * bleu;
}

MetricReport corpus_evaluate(const std::vector<EvalRecord>& records, const EvalOptions& options) {
  MetricReport report;
  long pooled_clipped[4] = {0, 0, 0, 0};
  long pooled_total[4] = {0, 0, 0, 0};
  long pooled_c = 0, pooled_r = 0;

  for (const auto& rec : records) {
    if (rec.references.empty()) {
      ++report.skipped;
      continue;
    }
    ExampleMetrics em;
    em.id = rec.id;
    for (int k = 1; k <= 4; ++k) {
      em.bleu[k - 1] = bleu_n(rec.candidate, rec.references, k, /*smoothing=*/true);
      auto s = order_stats(rec.candidate, rec.references, k);
      pooled_clipped[k - 1] += s.clipped;
      pooled_total[k - 1] += s.total;
    }
    if (!rec.candidate.empty()) {
      pooled_c += static_cast<int>(rec.candidate.size());
      pooled_r += closest_ref_length(static_cast<int>(rec.candidate.size()), rec.references);
    } else {
      pooled_r += static_cast<int>(rec.references[0].size());
    }
    em.rouge_l = rouge_l(rec.candidate, rec.references[0]);
    const Tokens& ref_raw =
        rec.references_raw.empty() ? rec.references[0] : rec.references_raw[0];
    auto ans = answerability_score(rec.candidate, rec.references[0], ref_raw, rec.passage_raw,
                                   options.weights, options.gazetteer);
    em.answerability = ans.score;
    em.components = ans.components;
    em.qbleu4 = options.qbleu_delta * ans.score +
                (1.0 - options.qbleu_delta) *
                    bleu_n(rec.candidate, {rec.references[0]}, 4, /*smoothing=*/true);

    report.mean_rouge_l += em.rouge_l;
    report.mean_answerability += em.answerability;
    report.mean_components.named_entity += em.components.named_entity;
    report.mean_components.important += em.components.important;
    report.mean_components.function_words += em.components.function_words;
    report.mean_components.question_type += em.components.question_type;
    report.mean_qbleu4 += em.qbleu4;
    report.per_example.push_back(std::move(em));
    ++report.count;
  }

  if (report.count > 0) {
    report.mean_rouge_l /= report.count;
    report.mean_answerability /= report.count;
    report.mean_components.named_entity /= report.count;
    report.mean_components.important /= report.count;
    report.mean_components.function_words /= report.count;
    report.mean_components.question_type /= report.count;
    report.mean_qbleu4 /= report.count;

    for (int k = 1; k <= 4; ++k) {
      double gm_log = 0.0;
      bool order_zero = false;
      for (int j = 1; j <= k; ++j) {
        if (pooled_total[j - 1] == 0 || pooled_clipped[j - 1] == 0) {
          order_zero = true;
          break;
        }
        gm_log += std::log(static_cast<double>(pooled_clipped[j - 1]) /
                           static_cast<double>(pooled_total[j - 1]));
      }
      const double bp =
          pooled_c < pooled_r && pooled_c > 0
              ? std::exp(1.0 - static_cast<double>(pooled_r) / static_cast<double>(pooled_c))
              : 1.0;
      report.corpus_bleu[k - 1] = order_zero ? 0.0 : bp * std::exp(gm_log / k);
    }
  }
  return report;
}

std::vector<EvalRecord> load_eval_records(const std::string& path, int* skipped) {
  std::ifstream in(path);
  if (!in) throw DataError("load_eval_records: cannot open " + path);
  std::vector<EvalRecord> out;
  std::string line;
  int bad = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      EvalRecord r;
      r.id = rec.value("id", "line-" + std::to_string(line_no));
      r.candidate = tokenize(rec.at("candidate").get<std::string>());
      for (const auto& ref : rec.at("references")) {
        Tokens raw;
        r.references.push_back(tokenize(ref.get<std::string>(), &raw));
        r.references_raw.push_back(std::move(raw));
      }
      if (rec.contains("passage")) {
        r.passage = tokenize(rec.at("passage").get<std::string>(), &r.passage_raw);
      }
      out.push_back(std::move(r));
    } catch (const json::exception&) {
      ++bad;
    }
  }
  if (skipped) *skipped = bad;
  return out;
}

std::vector<std::pair<int, double>> originality_curve(const std::vector<EvalRecord>& records,
                                                      const std::vector<int>& grid,
                                                      const EvalOptions& options) {
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> overlap(records.size(), 0.0);
  for (size_t i = 0; i < records.size(); ++i) {
    const Tokens& ref =
        records[i].references.empty() ? records[i].candidate : records[i].references[0];
    overlap[i] = passage_overlap_bleu2(ref, records[i].passage);
  }
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (overlap[a] != overlap[b]) return overlap[a] < overlap[b];
    return records[a].id < records[b].id;
  });

  std::vector<std::pair<int, double>> curve;
  for (int n : grid) {
    const int take = std::clamp(n, 0, static_cast<int>(records.size()));
    double acc = 0.0;
    int counted = 0;
    for (int i = 0; i < take; ++i) {
      const auto& rec = records[order[i]];
      if (rec.references.empty()) continue;
      const Tokens& ref_raw =
          rec.references_raw.empty() ? rec.references[0] : rec.references_raw[0];
      acc += qbleu4(rec.candidate, rec.references[0], ref_raw, rec.passage_raw,
                    options.qbleu_delta, options.weights, options.gazetteer);
      ++counted;
    }
    curve.emplace_back(take, counted ? acc / counted : 0.0);
  }
  return curve;
}

std::map<std::string, LengthStats> length_distribution(
    const std::vector<std::pair<std::string, int>>& tagged_lengths) {
  std::map<std::string, LengthStats> out;
  for (const auto& [tag, len] : tagged_lengths) {
    auto& stats = out[tag];
    ++stats.histogram[len];
    stats.mean += len;
    ++stats.count;
  }
  for (auto& [tag, stats] : out) {
    (void)tag;
    if (stats.count) stats.mean /= stats.count;
  }
  return out;
}

}  // namespace refnet
