#include "nic/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "nic/io.hpp"
#include "nic/linalg.hpp"

namespace nic {

std::vector<std::string> tokenize(const std::string& sentence) {
  static const std::string kPunct = ".,;:!?\"'()";
  std::vector<std::string> out;
  std::string cur;
  for (char ch : sentence) {
    const bool sep = std::isspace(static_cast<unsigned char>(ch)) ||
                     kPunct.find(ch) != std::string::npos;
    if (sep) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {"<start>", "<stop>", "<unk>"};
  for (int i = 0; i < 3; ++i) token_to_id_[id_to_token_[i]] = i;
}

int Vocabulary::add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const int id = static_cast<int>(id_to_token_.size());
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
  check(id >= 0 && static_cast<std::size_t>(id) < id_to_token_.size(),
        "Vocabulary: id out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size() + 2);
  out.push_back(kStart);
  for (const auto& t : tokens) out.push_back(id(t));
  out.push_back(kStop);
  return out;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kStart || id == kStop) continue;
    out.push_back(token(id));
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  };
  for (const auto& tok : id_to_token_) {
    for (char c : tok) mix(c);
    mix('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open vocabulary file for writing: " + path);
  for (const auto& tok : id_to_token_) out << tok << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < 3) {
      if (line != vocab.id_to_token_[static_cast<std::size_t>(lineno)])
        throw IoError("vocabulary file " + path + ": line " +
                      std::to_string(lineno + 1) +
                      " is not the expected reserved token");
    } else {
      vocab.add(line);
    }
    ++lineno;
  }
  if (lineno < 3)
    throw IoError("vocabulary file " + path + ": missing reserved tokens");
  return vocab;
}

Vocabulary build_vocabulary(
    const std::vector<std::vector<std::string>>& corpus,
    std::size_t min_count) {
  check(min_count >= 1, "build_vocabulary: min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& sent : corpus)
    for (const auto& tok : sent) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const auto& [tok, n] : kept) vocab.add(tok);
  return vocab;
}

}  // namespace nic
