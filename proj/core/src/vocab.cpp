#include "refnet/vocab.hpp"

#include <fstream>

#include "refnet/error.hpp"

namespace refnet {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>", "<sos>", "<eos>"};
  for (int i = 0; i < kReserved; ++i) token_to_id_[id_to_token_[i]] = i;
}

int Vocabulary::add(const std::string& token) {
  if (token_to_id_.count(token)) throw UsageError("Vocabulary: duplicate token " + token);
  int id = size();
  token_to_id_[token] = id;
  id_to_token_.push_back(token);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw UsageError("Vocabulary: id out of range " + std::to_string(id));
  return id_to_token_[id];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("Vocabulary: cannot write " + path);
  for (int i = kReserved; i < size(); ++i) out << id_to_token_[i] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("Vocabulary: cannot read " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) v.add(line);
  }
  return v;
}

uint64_t Vocabulary::hash() const {
  uint64_t h = 1469598103934665603ull;
  for (const auto& t : id_to_token_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= static_cast<unsigned char>('\n');
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace refnet
