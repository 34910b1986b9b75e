#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace nic {

std::vector<std::string> tokenize(const std::string& sentence);

// Bidirectional token <-> id map with reserved start/stop/unknown ids.
class Vocabulary {
 public:
  static constexpr int kStart = 0;
  static constexpr int kStop = 1;
  static constexpr int kUnk = 2;

  Vocabulary();

  // Adds a non-reserved token; returns its id (existing id if present).
  int add(const std::string& token);
  // id for a token, kUnk when absent.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return id_to_token_.size(); }

  // Wraps token ids in start/stop for training and scoring.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // Drops reserved ids, yields plain tokens.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  // FNV-1a over the token list; ties checkpoints to their vocabulary.
  std::uint64_t hash() const;

  // One token per line, line number = id, reserved tokens first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// Tokens with frequency >= min_count get ids, assigned in descending
// frequency then lexicographic order.
Vocabulary build_vocabulary(
    const std::vector<std::vector<std::string>>& corpus,
    std::size_t min_count);

}  // namespace nic
