#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace refnet {

// Token <-> id map with four reserved ids. Non-reserved ids are assigned by
// descending frequency with lexicographic tie-breaks, so building twice from
// the same corpus gives identical tables.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  // Appends a non-reserved token; returns its id. Duplicate -> UsageError.
  int add(const std::string& token);

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  // One token per line in id order; 0-based line index i holds id i + 4.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  // FNV-1a over all tokens, used to pair checkpoints with their vocabulary.
  uint64_t hash() const;

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace refnet
