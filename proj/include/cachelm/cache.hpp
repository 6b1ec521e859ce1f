#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace cachelm {

enum class CacheKind { kRegular, kNeural };

struct CacheConfig {
  int32_t capacity = 100;
  CacheKind kind = CacheKind::kNeural;
  double decay = 0.0;                // alpha, regular cache only
  double flatness = 0.3;             // theta, neural cache only
  double selective_threshold = 0.0;  // phi: admit only words with lambda >= phi
  bool normalize_hidden = false;     // cosine similarity instead of raw dot product

  void validate() const {
    if (capacity < 0) throw std::invalid_argument("cache: capacity must be >= 0");
    if (selective_threshold < 0.0 || selective_threshold > 1.0) {
      throw std::invalid_argument("cache: selective threshold must be in [0,1]");
    }
    if (kind == CacheKind::kRegular && decay < 0.0) {
      throw std::invalid_argument("cache: decay must be >= 0");
    }
    if (kind == CacheKind::kNeural && flatness <= 0.0) {
      throw std::invalid_argument("cache: flatness must be > 0");
    }
  }
};

/// One cached observation: a target word together with the hidden state
/// that predicted it, its insertion time and its information weight.
struct CacheEntry {
  int32_t word_id = -1;
  Eigen::VectorXd hidden;
  int64_t timestep = 0;
  double info_weight = 0.0;
};

/// Bounded FIFO of cache entries. current_time advances on every insertion
/// attempt, admitted or not, so decay ages stay aligned with the text.
struct CacheState {
  std::deque<CacheEntry> entries;
  int64_t current_time = 0;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }

  CacheState clone() const { return *this; }  // deep copy (no shared state)
};

/// Sparse distribution over word ids; support is the set of cached words.
/// Pairs are sorted by word id. An empty cache yields an empty support.
struct SparseProbs {
  std::vector<std::pair<int32_t, double>> probs;

  bool empty() const { return probs.empty(); }

  double of(int32_t word_id) const {
    for (const auto& [id, p] : probs)
      if (id == word_id) return p;
    return 0.0;
  }

  double sum() const {
    double s = 0.0;
    for (const auto& [id, p] : probs) s += p;
    return s;
  }
};

/// Appends (word, hidden, lambda) when lambda >= phi, evicting the oldest
/// entry when full; below the threshold the cache is unchanged but time
/// still advances.
inline void cache_insert(CacheState& cache, int32_t word_id, const Eigen::VectorXd& hidden,
                         double info_weight, const CacheConfig& config) {
  if (!cache.entries.empty() &&
      cache.entries.front().hidden.size() != hidden.size()) {
    throw std::invalid_argument("cache_insert: hidden state dimension mismatch");
  }
  const int64_t t = cache.current_time++;
  if (info_weight < config.selective_threshold) return;
  if (config.capacity == 0) return;
  if (static_cast<int64_t>(cache.entries.size()) >= config.capacity) {
    cache.entries.pop_front();
  }
  cache.entries.push_back(CacheEntry{word_id, hidden, t, info_weight});
}

namespace detail {

inline SparseProbs normalize_scores(const std::unordered_map<int32_t, double>& score_by_word,
                                    double total) {
  SparseProbs out;
  out.probs.reserve(score_by_word.size());
  for (const auto& [id, s] : score_by_word) out.probs.emplace_back(id, s / total);
  std::sort(out.probs.begin(), out.probs.end());
  return out;
}

}  // namespace detail

/// Eq.-1-style cache distribution: each entry weighs e^{-alpha * age}
/// (weight 1 when alpha = 0) and the per-word sums are normalized by the
/// total weight in the cache.
inline SparseProbs regular_cache_prob(const CacheState& cache, const CacheConfig& config) {
  if (config.kind != CacheKind::kRegular) {
    throw std::invalid_argument("regular_cache_prob: cache kind is not regular");
  }
  if (cache.empty()) return {};
  std::unordered_map<int32_t, double> score;
  double total = 0.0;
  for (const auto& e : cache.entries) {
    const double age = static_cast<double>(cache.current_time - e.timestep);
    const double w = config.decay == 0.0 ? 1.0 : std::exp(-config.decay * age);
    score[e.word_id] += w;
    total += w;
  }
  return detail::normalize_scores(score, total);
}

/// Similarity-weighted cache distribution: entry j scores
/// e^{theta * s(h_t, h_j)} with s the dot product (cosine when
/// normalize_hidden), softmax-normalized over all entries with
/// max-subtraction for overflow safety.
inline SparseProbs neural_cache_prob(const CacheState& cache, const Eigen::VectorXd& query,
                                     const CacheConfig& config) {
  if (config.kind != CacheKind::kNeural) {
    throw std::invalid_argument("neural_cache_prob: cache kind is not neural");
  }
  if (!query.allFinite()) {
    throw std::invalid_argument("neural_cache_prob: query hidden state is not finite");
  }
  if (cache.empty()) return {};

  const double query_norm = query.norm();
  std::vector<double> logits;
  logits.reserve(cache.entries.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& e : cache.entries) {
    if (e.hidden.size() != query.size()) {
      throw std::invalid_argument("neural_cache_prob: hidden state dimension mismatch");
    }
    double sim = query.dot(e.hidden);
    if (config.normalize_hidden) {
      const double denom = query_norm * e.hidden.norm();
      sim = denom > 0.0 ? sim / denom : 0.0;
    }
    const double logit = config.flatness * sim;
    logits.push_back(logit);
    max_logit = std::max(max_logit, logit);
  }

  std::unordered_map<int32_t, double> score;
  double total = 0.0;
  size_t idx = 0;
  for (const auto& e : cache.entries) {
    const double s = std::exp(logits[idx++] - max_logit);
    score[e.word_id] += s;
    total += s;
  }
  return detail::normalize_scores(score, total);
}

}  // namespace cachelm
