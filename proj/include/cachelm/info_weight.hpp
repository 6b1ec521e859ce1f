#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachelm/corpus.hpp"
#include "cachelm/vocab.hpp"

namespace cachelm {

/// Per-word information weights: 1 minus the normalized entropy of the
/// word's distribution over document chunks. 1 for a word confined to a
/// single chunk, 0 for a word spread uniformly over all chunks.
struct InfoWeights {
  std::vector<double> lambda;   // indexed by word id, each in [0,1]
  int64_t num_documents = 0;    // N
  int32_t source_chunk_size = 0;

  double of(int32_t word_id) const { return lambda[static_cast<size_t>(word_id)]; }
  int32_t size() const { return static_cast<int32_t>(lambda.size()); }
};

/// lambda_i = 1 + sum_j P(j|i) ln P(j|i) / ln N, with P(j|i) the fraction
/// of word i's corpus count that falls in chunk j. Zero-count terms
/// contribute nothing; words never seen in the corpus get lambda = 0.
/// Results are clamped to [0,1] against floating-point drift.
inline InfoWeights compute_info_weights(const DocumentChunks& docs, const Vocabulary& vocab) {
  const int64_t n = static_cast<int64_t>(docs.num_chunks());
  if (n < 2) {
    throw std::runtime_error("compute_info_weights: need at least 2 chunks, got " +
                             std::to_string(n));
  }
  const size_t v = static_cast<size_t>(vocab.size());
  std::vector<int64_t> corpus_count(v, 0);
  for (const auto& chunk : docs.chunks) {
    for (const auto& [id, count] : chunk) {
      if (id < 0 || static_cast<size_t>(id) >= v) {
        throw std::runtime_error("compute_info_weights: token id out of vocabulary range");
      }
      corpus_count[static_cast<size_t>(id)] += count;
    }
  }

  const double log_n = std::log(static_cast<double>(n));
  std::vector<double> entropy(v, 0.0);  // sum of p ln p (negative)
  for (const auto& chunk : docs.chunks) {
    for (const auto& [id, count] : chunk) {
      const double p = static_cast<double>(count) / static_cast<double>(corpus_count[id]);
      entropy[static_cast<size_t>(id)] += p * std::log(p);
    }
  }

  InfoWeights iw;
  iw.num_documents = n;
  iw.source_chunk_size = docs.chunk_size_sentences;
  iw.lambda.resize(v, 0.0);
  for (size_t i = 0; i < v; ++i) {
    if (corpus_count[i] == 0) continue;  // unseen vocabulary entries stay at 0
    double lam = 1.0 + entropy[i] / log_n;
    if (lam < 0.0) lam = 0.0;
    if (lam > 1.0) lam = 1.0;
    iw.lambda[i] = lam;
  }
  return iw;
}

/// TSV with a `#chunk_size=<n>\t#num_docs=<N>` header; weights printed at
/// full round-trip precision.
inline void save_info_weights(const InfoWeights& iw, const Vocabulary& vocab,
                              const std::string& path) {
  if (iw.size() != vocab.size()) {
    throw std::runtime_error("save_info_weights: table size does not match vocabulary");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_info_weights: cannot open " + path + " for writing");
  out << "#chunk_size=" << iw.source_chunk_size << "\t#num_docs=" << iw.num_documents << "\n";
  char buf[64];
  for (int32_t id = 0; id < vocab.size(); ++id) {
    std::snprintf(buf, sizeof(buf), "%.17g", iw.lambda[static_cast<size_t>(id)]);
    out << vocab.word(id) << '\t' << buf << '\n';
  }
  if (!out) throw std::runtime_error("save_info_weights: write failed for " + path);
}

inline InfoWeights load_info_weights(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_info_weights: cannot open " + path);
  InfoWeights iw;
  iw.lambda.assign(static_cast<size_t>(vocab.size()), 0.0);
  std::vector<bool> seen(static_cast<size_t>(vocab.size()), false);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("#chunk_size=", 0) == 0) {
      const size_t tab = line.find('\t');
      if (tab == std::string::npos || line.compare(tab + 1, 10, "#num_docs=") != 0) {
        throw std::runtime_error(path + ":1: malformed header line");
      }
      try {
        iw.source_chunk_size = std::stoi(line.substr(12, tab - 12));
        iw.num_documents = std::stoll(line.substr(tab + 11));
      } catch (const std::exception&) {
        throw std::runtime_error(path + ":1: malformed header line");
      }
      continue;
    }
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected word<TAB>lambda");
    }
    const std::string word = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    double lam = 0.0;
    size_t consumed = 0;
    try {
      lam = std::stod(value, &consumed);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric weight '" +
                               value + "'");
    }
    if (consumed != value.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": non-numeric weight '" +
                               value + "'");
    }
    if (!vocab.contains(word)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": word '" + word +
                               "' not in vocabulary");
    }
    const int32_t id = vocab.lookup(word);
    iw.lambda[static_cast<size_t>(id)] = lam;
    seen[static_cast<size_t>(id)] = true;
  }
  for (int32_t id = 0; id < vocab.size(); ++id) {
    if (!seen[static_cast<size_t>(id)]) {
      throw std::runtime_error(path + ": missing weight for vocabulary word '" + vocab.word(id) +
                               "'");
    }
  }
  return iw;
}

}  // namespace cachelm
