#pragma once

#include <functional>

#include "refnet/adam.hpp"
#include "refnet/checkpoint.hpp"
#include "refnet/metrics.hpp"
#include "refnet/model.hpp"
#include "refnet/toy.hpp"

namespace refnet {

struct TrainConfig {
  double lr = 0.0004;
  int epochs = 10;
  int reward_epochs = 3;
  int batch_size = 16;
  MaxLens max_lens;
  int max_decode_len = 30;
  double lambda_cov = 1.0;
  int cov_warmup_epochs = 1;  // coverage loss off for the first N epochs
  double w_prelim = 1.0;
  double w_refine = 1.0;
  uint64_t seed = 1234;
  std::string reward = "fluency";  // fluency | answerability | originality
  double reinforce_mle_mix = 0.0;  // 0 = pure REINFORCE
  bool finetune_update_encoder = true;
  double clip_norm = 5.0;
  bool teacher_force_draft = false;  // gold-draft ablation for the second pass

  void validate() const;  // throws ConfigError
};

// Deterministic, bounded [0, 1] scoring closures.
struct RewardFn {
  std::string name;
  std::function<double(const Tokens& candidate, const Tokens& reference, const Tokens& passage)>
      score;
};

double reward_fluency(const Tokens& candidate, const Tokens& reference);
double reward_answerability(const Tokens& candidate, const Tokens& reference);
double reward_originality(const Tokens& candidate, const Tokens& reference,
                          const Tokens& passage);

// Unknown name -> UsageError.
RewardFn make_reward(const std::string& name);

struct JointLoss {
  TensorPtr loss;      // on tape
  double ce_prelim = 0.0;  // mean per-token CE, for logging
  double ce_refine = 0.0;
};

// w_p * CE(preliminary) + w_r * CE(refinement) + lambda_cov * coverage, all
// over copy-mixed extended distributions, averaged per target token and then
// over the batch entries. The refinement pass consumes the current model's
// greedy draft with gradients stopped at the token identities (or the gold
// question under teacher_force_draft).
JointLoss joint_mle_loss(Tape* tape, const RefNetModel& model,
                         const std::vector<BatchEntry>& entries, const TrainConfig& cfg,
                         double lambda_cov_active);

// -(r(Q) - r(Q~)) * sum_t log p(q_t): minimizing ascends expected reward.
// Rewards are constants; the baseline r(Q~) carries no parameters.
TensorPtr reinforce_loss(Tape* tape, const Tokens& draft_tokens, const SampledSequence& sampled,
                         const Tokens& sampled_tokens, const RewardFn& reward,
                         const Tokens& reference, const Tokens& passage,
                         double* advantage_out = nullptr);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_bleu4 = 0.0;
  double wall_ms = 0.0;
  double mean_advantage = 0.0;  // reward fine-tuning only
};

struct FitResult {
  Checkpoint best;
  int best_epoch = 0;
  double best_val_bleu4 = 0.0;
  std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Joint MLE training with Adam; after every epoch the validation split is
// decoded greedily (refinement pass) and the best checkpoint by validation
// BLEU-4 is kept. Deterministic given cfg.seed.
FitResult fit(RefNetModel& model, const CorpusSplit& corpus, const Vocabulary& vocab,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct FinetuneResult {
  Checkpoint final;
  std::vector<EpochLog> history;
  bool reward_collapsed = false;  // all advantages zero for a full epoch
};

// REINFORCE-with-baseline fine-tuning: the refinement decoder samples, the
// preliminary decoder's greedy draft is the baseline. Preliminary-exclusive
// parameters are frozen (the baseline stays stationary); encoder updates are
// controlled by cfg.finetune_update_encoder.
FinetuneResult finetune_reward(RefNetModel& model, const CorpusSplit& corpus,
                               const Vocabulary& vocab, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

// Greedy two-pass decode of a split; returns per-example refinement outputs
// (and optionally drafts) as token strings.
struct DecodedExample {
  std::string id;
  Tokens draft;
  Tokens question;
  double logprob = 0.0;
};
std::vector<DecodedExample> decode_split(const RefNetModel& model,
                                         const std::vector<Example>& examples,
                                         const Vocabulary& vocab, const TrainConfig& cfg);

// Corpus BLEU-4 of greedy refinement outputs against the gold questions.
double validation_bleu4(const RefNetModel& model, const std::vector<Example>& examples,
                        const Vocabulary& vocab, const TrainConfig& cfg);

}  // namespace refnet
