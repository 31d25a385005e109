#pragma once

#include <cstdint>
#include <string>

#include "refnet/data.hpp"

namespace refnet {

// Desk-scale synthetic corpora standing in for SQuAD/HotpotQA/DROP.
//
//   copy-span     question = wh-word + the word left of the answer + the
//                 answer span itself; answers are unique nonsense tokens so
//                 a frequency-capped vocabulary pushes them out-of-vocab and
//                 the copy mechanism has to reproduce them.
//   corrupt-draft reference = completed version of the truncated template
//                 "how many <color> <obj>"; the completion depends on the
//                 passage, so a free-running first pass tends to derail
//                 mid-question while the second pass can lean on the draft.
//   counting      DROP-style "how many ..." over a synthetic list; the
//                 answer (a count word) is not a passage span.
struct ToySpec {
  std::string generator;  // copy-span | corrupt-draft | counting
  int train_size = 16;
  int val_size = 8;
  int test_size = 8;
};

// Deterministic for a given (spec, seed); splits are disjoint by id.
CorpusSplit make_toy_corpus(const ToySpec& spec, uint64_t seed);

}  // namespace refnet
