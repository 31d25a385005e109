#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace refnet {

using Tokens = std::vector<std::string>;

// Sentence-level BLEU with clipped modified n-gram precisions, geometric mean
// over orders 1..n and brevity penalty exp(1 - r/c) for c < r (r = closest
// reference length). Smoothing adds 1 to numerator and denominator of
// zero-match orders of size >= 2, so zero unigram overlap still scores 0.
// Orders for which the candidate has no n-grams are skipped, which keeps
// bleu_n(x, {x}) == 1 for any nonempty x. Empty candidate -> 0.
double bleu_n(const Tokens& candidate, const std::vector<Tokens>& references, int n,
              bool smoothing);

// Clipped-precision geometric mean of orders 1..2 against the passage with
// the brevity penalty disabled; this is the n-gram overlap measure used by
// the originality reward and the originality curve's sort key. (With the
// brevity penalty, a question copied verbatim from a long passage would
// score near 0 instead of near 1.)
double passage_overlap_bleu2(const Tokens& candidate, const Tokens& passage);

// LCS F-measure, F = ((1+b^2) P R) / (R + b^2 P) with b = 1.2 matching the
// conventional reference implementation.
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2);

struct AnswerabilityWeights {
  double named_entity = 0.25;
  double important = 0.25;
  double function_words = 0.25;
  double question_type = 0.25;
};

struct AnswerabilityComponents {
  double named_entity = 0.0;
  double important = 0.0;
  double function_words = 0.0;
  double question_type = 0.0;
};

struct AnswerabilityResult {
  double score = 0.0;
  AnswerabilityComponents components;
};

// Four-component match between candidate and reference. Named entities are
// detected by rule: tokens capitalized in the raw reference/passage text,
// tokens containing digits, plus an optional gazetteer. The leading token is
// the question-type slot (binary match) and is excluded from the other
// components; remaining tokens are function words (fixed built-in list) or
// important words. Each component is a multiset F1; a component with nothing
// required on either side counts 1.
AnswerabilityResult answerability_score(const Tokens& candidate, const Tokens& reference,
                                        const Tokens& reference_raw, const Tokens& passage_raw,
                                        const AnswerabilityWeights& weights,
                                        const std::set<std::string>* gazetteer = nullptr);

// delta * answerability + (1 - delta) * smoothed sentence BLEU-4.
double qbleu4(const Tokens& candidate, const Tokens& reference, const Tokens& reference_raw,
              const Tokens& passage_raw, double delta,
              const AnswerabilityWeights& weights = {},
              const std::set<std::string>* gazetteer = nullptr);

bool is_function_word(const std::string& token);

struct EvalRecord {
  std::string id;
  Tokens candidate;
  std::vector<Tokens> references;
  std::vector<Tokens> references_raw;
  Tokens passage;
  Tokens passage_raw;
};

struct ExampleMetrics {
  std::string id;
  double bleu[4] = {0, 0, 0, 0};  // sentence-level, smoothed
  double rouge_l = 0.0;
  double answerability = 0.0;
  AnswerabilityComponents components;
  double qbleu4 = 0.0;
};

// All values live in [0, 1]; interfaces that print reports scale by 100.
struct MetricReport {
  int count = 0;
  int skipped = 0;
  double corpus_bleu[4] = {0, 0, 0, 0};  // pooled statistics, unsmoothed
  double mean_rouge_l = 0.0;
  double mean_answerability = 0.0;
  AnswerabilityComponents mean_components;
  double mean_qbleu4 = 0.0;
  std::vector<ExampleMetrics> per_example;
};

struct EvalOptions {
  AnswerabilityWeights weights;
  double qbleu_delta = 0.5;
  const std::set<std::string>* gazetteer = nullptr;
};

MetricReport corpus_evaluate(const std::vector<EvalRecord>& records,
                             const EvalOptions& options = {});

// JSON-lines {id, candidate, references: [..], passage}; malformed records
// are skipped and counted through *skipped.
std::vector<EvalRecord> load_eval_records(const std::string& path, int* skipped = nullptr);

// Records sorted ascending by reference/passage overlap (ties by id); for
// each N in the grid (clamped to the corpus size), mean QBLEU-4 over the
// first N records.
std::vector<std::pair<int, double>> originality_curve(const std::vector<EvalRecord>& records,
                                                      const std::vector<int>& grid,
                                                      const EvalOptions& options = {});

struct LengthStats {
  std::map<int, int> histogram;
  double mean = 0.0;
  int count = 0;
};

// Token-length histograms keyed by decoder tag (e.g. preliminary/refinement).
std::map<std::string, LengthStats> length_distribution(
    const std::vector<std::pair<std::string, int>>& tagged_lengths);

}  // namespace refnet
