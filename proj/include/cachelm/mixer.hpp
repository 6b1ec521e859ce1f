#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "cachelm/cache.hpp"
#include "cachelm/info_weight.hpp"

namespace cachelm {

enum class MixMode { kLinear, kInfoWeighted };

struct MixConfig {
  MixMode mode = MixMode::kLinear;
  double lambda_interp = 0.1;  // linear mode
  double gamma = 0.0;          // iw mode, capped at 0.5

  void validate() const {
    if (mode == MixMode::kLinear && (lambda_interp < 0.0 || lambda_interp > 1.0)) {
      throw std::invalid_argument("mix: lambda must be in [0,1]");
    }
    if (mode == MixMode::kInfoWeighted && (gamma < 0.0 || gamma > 0.5)) {
      throw std::invalid_argument("mix: gamma must be in [0,0.5]");
    }
  }
};

/// P(w) = (1-lambda) p_lm(w) + lambda p_cache(w). An empty cache is a
/// strict identity: the LM distribution is returned unchanged.
inline Eigen::VectorXd mix_linear(const Eigen::VectorXd& p_lm, const SparseProbs& p_cache,
                                  double lambda) {
  if (lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("mix_linear: lambda must be in [0,1]");
  }
  if (p_cache.empty() || lambda == 0.0) return p_lm;
  Eigen::VectorXd out = (1.0 - lambda) * p_lm;
  for (const auto& [id, p] : p_cache.probs) {
    if (id < 0 || id >= out.size()) throw std::invalid_argument("mix_linear: cache word id out of range");
    out[id] += lambda * p;
  }
  return out;
}

/// Information-weighted interpolation: unnormalized mass per word is
/// (1 - gamma*lambda_w) p_lm(w) + gamma*lambda_w p_cache(w), renormalized
/// over the vocabulary. Words absent from the cache keep p_cache(w) = 0,
/// which is what makes the renormalization necessary.
inline Eigen::VectorXd mix_iw(const Eigen::VectorXd& p_lm, const SparseProbs& p_cache,
                              double gamma, const InfoWeights& iw) {
  if (gamma < 0.0 || gamma > 0.5) {
    throw std::invalid_argument("mix_iw: gamma must be in [0,0.5]");
  }
  if (iw.size() != p_lm.size()) {
    throw std::invalid_argument("mix_iw: info-weight table size does not match vocabulary");
  }
  if (p_cache.empty() || gamma == 0.0) return p_lm;
  Eigen::VectorXd mass(p_lm.size());
  for (Eigen::Index w = 0; w < p_lm.size(); ++w) {
    mass[w] = (1.0 - gamma * iw.lambda[static_cast<size_t>(w)]) * p_lm[w];
  }
  for (const auto& [id, p] : p_cache.probs) {
    if (id < 0 || id >= mass.size()) throw std::invalid_argument("mix_iw: cache word id out of range");
    mass[id] += gamma * iw.lambda[static_cast<size_t>(id)] * p;
  }
  return mass / mass.sum();
}

inline constexpr double kProbFloor = 1e-12;

/// Natural-log probability of word_id, floored at ln(1e-12) so perplexity
/// accumulation never sees -inf; floor events are counted when a counter
/// is supplied.
inline double log_prob_of(const Eigen::VectorXd& p, int32_t word_id,
                          int64_t* floor_events = nullptr) {
  if (word_id < 0 || word_id >= p.size()) {
    throw std::out_of_range("log_prob_of: word id out of range");
  }
  const double prob = p[word_id];
  if (prob < kProbFloor) {
    if (floor_events) ++*floor_events;
    return std::log(kProbFloor);
  }
  return std::log(prob);
}

}  // namespace cachelm
