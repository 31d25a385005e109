#include "refnet/toy.hpp"

#include <random>

#include "refnet/error.hpp"
#include "refnet/param.hpp"

namespace refnet {

namespace {

int rand_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& pool) {
  return pool[static_cast<size_t>(rand_int(rng, 0, static_cast<int>(pool.size()) - 1))];
}

const std::vector<std::string> kFillers = {
    "the",  "a",     "old",   "small", "near",  "tall",  "house", "garden", "river",
    "road", "stone", "tree",  "wall",  "gate",  "field", "hill",  "market", "tower",
    "barn", "lamp",  "bench", "cloud", "bridge"};

const std::vector<std::string> kNames = {"anna", "ben",  "carl",  "dora", "edgar", "fiona",
                                         "george", "hana", "ivan", "julia", "karl", "lena"};
const std::vector<std::string> kColors = {"red",    "blue",  "green",  "yellow",
                                          "black",  "white", "purple", "orange"};
const std::vector<std::string> kObjects = {"balls", "cups",  "books",  "pens",   "coins",
                                           "cards", "stones", "shells", "hats",  "keys"};
const std::vector<std::string> kContainers = {"box",    "bag",   "room",   "shelf",
                                              "garden", "house", "drawer", "basket"};
const std::vector<std::string> kNumbers = {"two",   "three", "four", "five",  "six",
                                           "seven", "eight", "nine", "ten",   "twelve"};
const std::vector<std::string> kFruits = {"apples", "pears",  "plums",  "figs",
                                          "grapes", "dates",  "melons", "limes"};
const std::vector<std::string> kIntros = {"today", "yesterday", "recently"};

std::string nonsense_token(std::mt19937_64& rng) {
  static const char* consonants = "bcdfgjklmnpqrstvwxz";
  std::string t;
  for (int i = 0; i < 5; ++i) t.push_back(consonants[rng() % 19]);
  return t;
}

Example make_copy_span(std::mt19937_64& rng, const std::string& id) {
  Example ex;
  ex.id = id;
  const int len = rand_int(rng, 6, 10);
  for (int i = 0; i < len; ++i) ex.passage_tokens.push_back(pick(rng, kFillers));
  const int pos = rand_int(rng, 1, len - 1);
  const std::string answer = nonsense_token(rng);
  ex.passage_tokens[pos] = answer;
  ex.passage_tokens.push_back(".");
  ex.answer_tokens = {answer};
  ex.has_span = true;
  ex.span_start = pos;
  ex.span_len = 1;
  ex.question_tokens = {"what", "is", ex.passage_tokens[pos - 1], answer, "?"};
  ex.passage_raw = ex.passage_tokens;
  ex.question_raw = ex.question_tokens;
  return ex;
}

Example make_corrupt_draft(std::mt19937_64& rng, const std::string& id) {
  Example ex;
  ex.id = id;
  const std::string& name = pick(rng, kNames);
  std::string other = pick(rng, kNames);
  while (other == name) other = pick(rng, kNames);
  const std::string& num = pick(rng, kNumbers);
  const std::string& color = pick(rng, kColors);
  const std::string& obj = pick(rng, kObjects);
  const std::string& container = pick(rng, kContainers);
  std::string other_container = pick(rng, kContainers);

  const int intro_len = rand_int(rng, 0, 2);
  for (int i = 0; i < intro_len; ++i) ex.passage_tokens.push_back(pick(rng, kIntros));
  for (const std::string& t :
       {other, std::string("likes"), std::string("the"), other_container, std::string(".")}) {
    ex.passage_tokens.push_back(t);
  }
  const int span_pos = static_cast<int>(ex.passage_tokens.size()) + 2;
  for (const std::string& t : {name, std::string("has"), num, color, obj, std::string("in"),
                               std::string("the"), container, std::string(".")}) {
    ex.passage_tokens.push_back(t);
  }
  ex.answer_tokens = {num};
  ex.has_span = true;
  ex.span_start = span_pos;
  ex.span_len = 1;
  // Template prefix "how many <color> <obj>" completed with passage content;
  // the reference is strictly longer than the embedded prefix by construction.
  ex.question_tokens = {"how", "many", color, obj, "does", name, "have", "?"};
  ex.passage_raw = ex.passage_tokens;
  ex.question_raw = ex.question_tokens;
  return ex;
}

Example make_counting(std::mt19937_64& rng, const std::string& id) {
  Example ex;
  ex.id = id;
  const int n = rand_int(rng, 2, 5);
  std::vector<std::string> items;
  for (int i = 0; i < n; ++i) items.push_back(pick(rng, kFruits));
  const std::string& container = pick(rng, kContainers);
  ex.passage_tokens = {"the", container, "holds"};
  for (int i = 0; i < n; ++i) {
    if (i) ex.passage_tokens.push_back(",");
    ex.passage_tokens.push_back(items[i]);
  }
  ex.passage_tokens.push_back(".");
  ex.answer_tokens = {kNumbers[n - 2]};  // "two".."five", not a passage span
  ex.has_span = false;
  ex.question_tokens = {"how", "many", "fruits", "are", "in", "the", container, "?"};
  ex.passage_raw = ex.passage_tokens;
  ex.question_raw = ex.question_tokens;
  return ex;
}

}  // namespace

CorpusSplit make_toy_corpus(const ToySpec& spec, uint64_t seed) {
  Example (*gen)(std::mt19937_64&, const std::string&) = nullptr;
  if (spec.generator == "copy-span") {
    gen = &make_copy_span;
  } else if (spec.generator == "corrupt-draft") {
    gen = &make_corrupt_draft;
  } else if (spec.generator == "counting") {
    gen = &make_counting;
  } else {
    throw UsageError("make_toy_corpus: unknown generator \"" + spec.generator +
                     "\" (expected copy-span, corrupt-draft, or counting)");
  }

  std::mt19937_64 rng(seed);
  CorpusSplit split;
  auto fill = [&](std::vector<Example>& dst, int count, const char* tag) {
    for (int i = 0; i < count; ++i) {
      dst.push_back(gen(rng, spec.generator + "-" + std::to_string(seed) + "-" + tag + "-" +
                                 std::to_string(i)));
    }
  };
  fill(split.train, spec.train_size, "train");
  fill(split.validation, spec.val_size, "val");
  fill(split.test, spec.test_size, "test");
  split.provenance = "toy generator " + spec.generator + ", seed " + std::to_string(seed) +
                     ", sizes " + std::to_string(spec.train_size) + "/" +
                     std::to_string(spec.val_size) + "/" + std::to_string(spec.test_size);
  return split;
}

}  // namespace refnet
