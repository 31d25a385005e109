#include "refnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "refnet/error.hpp"

namespace refnet {

void TrainConfig::validate() const {
  if (lr <= 0 || epochs < 1 || reward_epochs < 1 || batch_size < 1 || max_decode_len < 1 ||
      w_prelim < 0 || w_refine < 0 || lambda_cov < 0 || cov_warmup_epochs < 0 ||
      clip_norm <= 0 || reinforce_mle_mix < 0) {
    throw ConfigError("TrainConfig: all sizes/rates must be positive");
  }
  if (reward != "fluency" && reward != "answerability" && reward != "originality") {
    throw ConfigError("TrainConfig: unknown reward \"" + reward + "\"");
  }
}

double reward_fluency(const Tokens& candidate, const Tokens& reference) {
  if (reference.empty()) throw UsageError("reward_fluency: empty reference");
  return bleu_n(candidate, {reference}, 4, /*smoothing=*/true);
}

double reward_answerability(const Tokens& candidate, const Tokens& reference) {
  if (reference.empty()) throw UsageError("reward_answerability: empty reference");
  return answerability_score(candidate, reference, reference, {}, AnswerabilityWeights{}).score;
}

double reward_originality(const Tokens& candidate, const Tokens& reference,
                          const Tokens& passage) {
  (void)reference;
  if (passage.empty()) throw UsageError("reward_originality: empty passage");
  return std::max(0.0, 1.0 - passage_overlap_bleu2(candidate, passage));
}

RewardFn make_reward(const std::string& name) {
  if (name == "fluency") {
    return {name, [](const Tokens& c, const Tokens& r, const Tokens&) {
              return reward_fluency(c, r);
            }};
  }
  if (name == "answerability") {
    return {name, [](const Tokens& c, const Tokens& r, const Tokens&) {
              return reward_answerability(c, r);
            }};
  }
  if (name == "originality") {
    return {name, [](const Tokens& c, const Tokens& r, const Tokens& p) {
              return reward_originality(c, r, p);
            }};
  }
  throw UsageError("make_reward: unknown reward \"" + name + "\"");
}

namespace {

TensorPtr sum_list(Tape* tape, const std::vector<TensorPtr>& terms) {
  TensorPtr acc = terms.front();
  for (size_t i = 1; i < terms.size(); ++i) acc = add(tape, acc, terms[i]);
  return acc;
}

TensorPtr mean_nll(Tape* tape, const ForcedPass& pass) {
  return scale_const(tape, sum_list(tape, pass.step_nlls), 1.0 / pass.steps);
}

}  // namespace

JointLoss joint_mle_loss(Tape* tape, const RefNetModel& model,
                         const std::vector<BatchEntry>& entries, const TrainConfig& cfg,
                         double lambda_cov_active) {
  if (entries.empty()) throw UsageError("joint_mle_loss: empty batch");
  JointLoss out;
  std::vector<TensorPtr> example_losses;
  for (const auto& entry : entries) {
    auto enc = model.encode(tape, entry);

    auto prelim = model.forced_preliminary(tape, enc, entry);
    std::vector<int> draft_tokens;
    if (cfg.teacher_force_draft) {
      draft_tokens = entry.question_target_ids;
    } else {
      draft_tokens = model.decode_draft(DecodeMode::Greedy, enc, entry, cfg.max_decode_len).tokens;
    }
    auto refine = model.forced_refinement(tape, enc, entry, draft_tokens);

    auto ce_p = mean_nll(tape, prelim);
    auto ce_r = mean_nll(tape, refine);
    out.ce_prelim += ce_p->values[0];
    out.ce_refine += ce_r->values[0];

    auto loss = add(tape, scale_const(tape, ce_p, cfg.w_prelim),
                    scale_const(tape, ce_r, cfg.w_refine));
    if (lambda_cov_active > 0.0) {
      auto cov = add(tape, prelim.coverage_penalty, refine.coverage_penalty);
      loss = add(tape, loss,
                 scale_const(tape, cov, lambda_cov_active / (prelim.steps + refine.steps)));
    }
    example_losses.push_back(loss);
  }
  out.loss = scale_const(tape, sum_list(tape, example_losses),
                         1.0 / static_cast<double>(example_losses.size()));
  out.ce_prelim /= static_cast<double>(entries.size());
  out.ce_refine /= static_cast<double>(entries.size());
  if (!out.loss->all_finite()) throw NumericError("joint_mle_loss: non-finite loss");
  return out;
}

TensorPtr reinforce_loss(Tape* tape, const Tokens& draft_tokens, const SampledSequence& sampled,
                         const Tokens& sampled_tokens, const RewardFn& reward,
                         const Tokens& reference, const Tokens& passage, double* advantage_out) {
  const double r_sampled = reward.score(sampled_tokens, reference, passage);
  const double r_draft = reward.score(draft_tokens, reference, passage);
  const double advantage = r_sampled - r_draft;
  if (advantage_out) *advantage_out = advantage;
  // loss = -(r(Q) - r(Q~)) * sum log p = advantage * sum nll; rewards are
  // plain constants so no gradient flows through them.
  auto total_nll = sum_list(tape, sampled.step_nlls);
  return scale_const(tape, total_nll, advantage);
}

std::vector<DecodedExample> decode_split(const RefNetModel& model,
                                         const std::vector<Example>& examples,
                                         const Vocabulary& vocab, const TrainConfig& cfg) {
  std::vector<DecodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto entry = make_batch_entry(ex, vocab, model.config().pos_clip);
    auto enc = model.encode(nullptr, entry);
    auto draft = model.decode_draft(DecodeMode::Greedy, enc, entry, cfg.max_decode_len);
    auto refined = model.greedy_refinement(enc, entry, draft.tokens, cfg.max_decode_len);
    DecodedExample d;
    d.id = ex.id;
    d.draft = ids_to_tokens(draft.tokens, vocab, entry);
    d.question = ids_to_tokens(refined.tokens, vocab, entry);
    d.logprob = std::accumulate(refined.logprobs.begin(), refined.logprobs.end(), 0.0);
    out.push_back(std::move(d));
  }
  return out;
}

double validation_bleu4(const RefNetModel& model, const std::vector<Example>& examples,
                        const Vocabulary& vocab, const TrainConfig& cfg) {
  auto decoded = decode_split(model, examples, vocab, cfg);
  std::vector<EvalRecord> records;
  records.reserve(decoded.size());
  for (size_t i = 0; i < decoded.size(); ++i) {
    EvalRecord r;
    r.id = decoded[i].id;
    r.candidate = decoded[i].question;
    r.references = {examples[i].question_tokens};
    records.push_back(std::move(r));
  }
  auto report = corpus_evaluate(records);
  return report.corpus_bleu[3];
}

namespace {

struct FreezeSet {
  std::vector<TensorPtr> frozen;
  void apply() const {
    for (const auto& t : frozen) t->zero_grad();
  }
};

FreezeSet finetune_freezes(RefNetModel& model, const TrainConfig& cfg) {
  FreezeSet fs;
  for (const auto& p : model.params().all()) {
    const bool prelim = RefNetModel::is_preliminary_exclusive(p.name);
    const bool enc = !cfg.finetune_update_encoder &&
                     (p.name.rfind("encoder.", 0) == 0 || p.name.rfind("embed.", 0) == 0);
    if (prelim || enc) fs.frozen.push_back(p.tensor);
  }
  return fs;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::vector<std::vector<BatchEntry>> shuffled_batches(const std::vector<Example>& train,
                                                      const Vocabulary& vocab,
                                                      const TrainConfig& cfg, int pos_clip,
                                                      std::mt19937_64& rng) {
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<Example> shuffled;
  shuffled.reserve(order.size());
  for (size_t idx : order) shuffled.push_back(train[idx]);
  auto batching = make_batches(shuffled, vocab, cfg.batch_size, cfg.max_lens, pos_clip);
  std::vector<std::vector<BatchEntry>> out;
  for (auto& b : batching.batches) out.push_back(std::move(b.entries));
  return out;
}

}  // namespace

FitResult fit(RefNetModel& model, const CorpusSplit& corpus, const Vocabulary& vocab,
              const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.train.empty()) throw UsageError("fit: empty training split");
  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  FitResult result;
  result.best_val_bleu4 = -1.0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double t0 = now_ms();
    const double lambda = epoch > cfg.cov_warmup_epochs ? cfg.lambda_cov : 0.0;
    double loss_sum = 0.0;
    int batches = 0;
    for (auto& entries : shuffled_batches(corpus.train, vocab, cfg, model.config().pos_clip, rng)) {
      Tape tape;
      JointLoss jl;
      try {
        jl = joint_mle_loss(&tape, model, entries, cfg, lambda);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches) + ")");
      }
      loss_sum += jl.loss->values[0];
      ++batches;
      model.params().zero_grads();
      backward(tape, jl.loss);
      model.tables().apply_freeze();
      clip_global_norm(model.params(), cfg.clip_norm);
      adam_step(model.params(), adam, cfg.lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / batches : 0.0;
    log.val_bleu4 =
        corpus.validation.empty() ? 0.0 : validation_bleu4(model, corpus.validation, vocab, cfg);
    log.wall_ms = now_ms() - t0;
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);

    if (log.val_bleu4 > result.best_val_bleu4 || result.best_epoch == 0) {
      result.best = snapshot_params(model.params());
      result.best.vocab_hash = vocab.hash();
      result.best.config = model_config_to_json(model.config());
      result.best.epoch = epoch;
      result.best.val_bleu4 = log.val_bleu4;
      result.best_epoch = epoch;
      result.best_val_bleu4 = log.val_bleu4;
    }
  }
  return result;
}

FinetuneResult finetune_reward(RefNetModel& model, const CorpusSplit& corpus,
                               const Vocabulary& vocab, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
  cfg.validate();
  if (corpus.train.empty()) throw UsageError("finetune_reward: empty training split");
  const RewardFn reward = make_reward(cfg.reward);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamState adam;
  auto freezes = finetune_freezes(model, cfg);
  FinetuneResult result;

  for (int epoch = 1; epoch <= cfg.reward_epochs; ++epoch) {
    const double t0 = now_ms();
    double loss_sum = 0.0;
    double advantage_sum = 0.0;
    int steps = 0;
    int batches = 0;
    bool any_nonzero_advantage = false;

    for (auto& entries : shuffled_batches(corpus.train, vocab, cfg, model.config().pos_clip, rng)) {
      Tape tape;
      std::vector<TensorPtr> example_losses;
      for (const auto& entry : entries) {
        auto enc = model.encode(&tape, entry);
        auto draft = model.decode_draft(DecodeMode::Greedy, enc, entry, cfg.max_decode_len);
        auto sampled =
            model.sample_refinement(&tape, enc, entry, draft.tokens, cfg.max_decode_len, rng);

        const Tokens draft_toks = ids_to_tokens(draft.tokens, vocab, entry);
        const Tokens sampled_toks = ids_to_tokens(sampled.ids, vocab, entry);
        double advantage = 0.0;
        auto loss = reinforce_loss(&tape, draft_toks, sampled, sampled_toks, reward,
                                   entry.question_tokens, entry.passage_tokens, &advantage);
        advantage_sum += advantage;
        if (advantage != 0.0) any_nonzero_advantage = true;

        if (cfg.reinforce_mle_mix > 0.0) {
          auto forced = model.forced_refinement(&tape, enc, entry, draft.tokens);
          auto ce = scale_const(&tape, sum_list(&tape, forced.step_nlls), 1.0 / forced.steps);
          loss = add(&tape, loss, scale_const(&tape, ce, cfg.reinforce_mle_mix));
        }
        example_losses.push_back(loss);
        ++steps;
      }
      TensorPtr batch_loss = example_losses.front();
      for (size_t i = 1; i < example_losses.size(); ++i) {
        batch_loss = add(&tape, batch_loss, example_losses[i]);
      }
      batch_loss = scale_const(&tape, batch_loss, 1.0 / example_losses.size());
      if (!batch_loss->all_finite()) {
        throw NumericError("finetune_reward: non-finite loss (epoch " + std::to_string(epoch) +
                           ")");
      }
      loss_sum += batch_loss->values[0];
      ++batches;
      model.params().zero_grads();
      backward(tape, batch_loss);
      model.tables().apply_freeze();
      freezes.apply();
      clip_global_norm(model.params(), cfg.clip_norm);
      adam_step(model.params(), adam, cfg.lr);
    }

    if (!any_nonzero_advantage) {
      result.reward_collapsed = true;
      std::fprintf(stderr,
                   "finetune_reward: warning: all advantages were zero in epoch %d (reward "
                   "collapse)\n",
                   epoch);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / batches : 0.0;
    log.val_bleu4 =
        corpus.validation.empty() ? 0.0 : validation_bleu4(model, corpus.validation, vocab, cfg);
    log.mean_advantage = steps ? advantage_sum / steps : 0.0;
    log.wall_ms = now_ms() - t0;
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }

  result.final = snapshot_params(model.params());
  result.final.vocab_hash = vocab.hash();
  result.final.config = model_config_to_json(model.config());
  result.final.config["reward"] = cfg.reward;
  result.final.epoch = cfg.reward_epochs;
  result.final.val_bleu4 = result.history.empty() ? 0.0 : result.history.back().val_bleu4;
  return result;
}

}  // namespace refnet
