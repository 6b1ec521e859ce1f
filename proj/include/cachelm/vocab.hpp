#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cachelm {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kEosToken = "<eos>";

/// Bidirectional word<->id map with reserved unknown and end-of-sentence
/// tokens. Ids are dense 0..V-1; lookups of absent words return unk_id.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const auto& w : words) {
      if (v.index_.count(w)) {
        throw std::runtime_error("vocabulary: duplicate word '" + w + "'");
      }
      v.index_.emplace(w, static_cast<int32_t>(v.words_.size()));
      v.words_.push_back(w);
    }
    auto unk = v.index_.find(kUnkToken);
    auto eos = v.index_.find(kEosToken);
    if (unk == v.index_.end() || eos == v.index_.end()) {
      throw std::runtime_error("vocabulary: reserved tokens <unk>/<eos> missing");
    }
    v.unk_id_ = unk->second;
    v.eos_id_ = eos->second;
    return v;
  }

  int32_t size() const { return static_cast<int32_t>(words_.size()); }
  int32_t unk_id() const { return unk_id_; }
  int32_t eos_id() const { return eos_id_; }

  int32_t lookup(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? unk_id_ : it->second;
  }

  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  const std::string& word(int32_t id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("vocabulary: id out of range");
    return words_[static_cast<size_t>(id)];
  }

  const std::vector<std::string>& words() const { return words_; }

  // FNV-1a over the word list; binds checkpoints and IW tables to the
  // vocabulary they were built with.
  uint64_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& w : words_) {
      for (unsigned char c : w) {
        h ^= c;
        h *= 0x100000001b3ull;
      }
      h ^= static_cast<unsigned char>('\n');
      h *= 0x100000001b3ull;
    }
    return h;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("vocabulary: cannot open " + path + " for writing");
    for (const auto& w : words_) out << w << '\n';
    if (!out) throw std::runtime_error("vocabulary: write failed for " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("vocabulary: cannot open " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw std::runtime_error("vocabulary: empty line " + std::to_string(words.size() + 1) + " in " + path);
      words.push_back(line);
    }
    return from_words(words);
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int32_t> index_;
  int32_t unk_id_ = -1;
  int32_t eos_id_ = -1;
};

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

/// Builds a vocabulary from pre-tokenized text. Words below min_count map
/// to <unk>; at most max_size regular words are kept (frequency descending,
/// lexicographic tie-break). <unk> and <eos> are always present, at ids 0
/// and 1.
inline Vocabulary build_vocabulary(const std::vector<std::string>& lines,
                                   int64_t min_count = 1,
                                   int64_t max_size = -1) {
  std::unordered_map<std::string, int64_t> counts;
  int64_t total = 0;
  for (const auto& line : lines) {
    for (const auto& tok : split_tokens(line)) {
      ++counts[tok];
      ++total;
    }
  }
  if (total == 0) throw std::runtime_error("build_vocabulary: empty corpus");

  counts.erase(kUnkToken);
  counts.erase(kEosToken);

  std::vector<std::pair<std::string, int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> words = {kUnkToken, kEosToken};
  for (const auto& [word, count] : ranked) {
    if (count < min_count) break;
    if (max_size >= 0 && static_cast<int64_t>(words.size()) - 2 >= max_size) break;
    words.push_back(word);
  }
  return Vocabulary::from_words(words);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace cachelm
