#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelm/cache.hpp"
#include "cachelm/evaluator.hpp"
#include "cachelm/info_weight.hpp"
#include "cachelm/lstm.hpp"
#include "cachelm/mixer.hpp"
#include "cachelm/nbest.hpp"
#include "cachelm/vocab.hpp"
#include "cachelm/wer.hpp"

namespace cachelm {

struct RescoreConfig {
  double lambda_lstm = 0.5;           // weight of the LSTM+cache probability
  double lm_scale = 1.0;              // beta
  double word_insertion_penalty = 0.0;  // omega
  CacheConfig cache;
  MixConfig mix;
  const InfoWeights* iw = nullptr;
  bool transfer_cache = true;

  void validate() const {
    if (lambda_lstm < 0.0 || lambda_lstm > 1.0) {
      throw std::invalid_argument("rescore: lambda_lstm must be in [0,1]");
    }
    if (lm_scale <= 0.0) throw std::invalid_argument("rescore: lm_scale must be > 0");
    cache.validate();
    mix.validate();
    if (mix.mode == MixMode::kInfoWeighted && iw == nullptr) {
      throw std::invalid_argument("rescore: information-weighted mixing requires an IW table");
    }
    if (cache.selective_threshold > 0.0 && iw == nullptr) {
      throw std::invalid_argument("rescore: a selective cache requires an IW table");
    }
  }
};

/// Result of scoring one hypothesis: the combined score, the summed and
/// per-event interpolated LM log probabilities (one per word plus one for
/// <eos>), and the cache as it stands after consuming the hypothesis.
struct ScoredHypothesis {
  double total = 0.0;
  double lm_log_sum = 0.0;
  std::vector<double> event_log_probs;
  CacheState outgoing_cache;
};

/// Scores words + <eos> left to right from a zero LSTM state and a clone
/// of the incoming cache. Per event, the n-gram and the cache-augmented
/// LSTM probabilities are combined in probability space; events without a
/// per-word n-gram column use a uniform split of the hypothesis-level
/// n-gram score. The combined score is
/// acoustic + lm_scale * sum(ln P_new) + word_count * omega.
template <typename T>
ScoredHypothesis score_hypothesis(const LstmModel<T>& model, const Vocabulary& vocab,
                                  const Hypothesis& hyp, const CacheState& incoming,
                                  const RescoreConfig& config) {
  config.validate();
  if (config.iw != nullptr && config.iw->size() != model.vocab_size()) {
    throw std::runtime_error("score_hypothesis: IW table size does not match the model");
  }

  const int32_t num_events = hyp.word_count() + 1;  // words plus <eos>
  std::vector<int32_t> targets;
  targets.reserve(static_cast<size_t>(num_events));
  for (const auto& w : hyp.words) targets.push_back(vocab.lookup(w));
  targets.push_back(vocab.eos_id());

  const bool per_word = !hyp.word_ngram_logps.empty();
  const double uniform_ngram = hyp.ngram_logp / static_cast<double>(num_events);
  const double lam = config.lambda_lstm;

  ScoredHypothesis result;
  result.outgoing_cache = incoming.clone();
  result.event_log_probs.reserve(static_cast<size_t>(num_events));

  LstmState<T> state = LstmState<T>::zero(model.hidden_size());
  int32_t input = vocab.eos_id();
  for (int32_t k = 0; k < num_events; ++k) {
    const int32_t target = targets[static_cast<size_t>(k)];
    LmStep step = forward_step(model, input, state);

    const double ngram_lp =
        per_word ? hyp.word_ngram_logps[static_cast<size_t>(k)] : uniform_ngram;
    double event_lp;
    if (lam == 0.0) {
      event_lp = ngram_lp;
      // The cache still has to track the hypothesis for transfer.
    } else {
      SparseProbs p_cache;
      if (!result.outgoing_cache.empty()) {
        p_cache = config.cache.kind == CacheKind::kRegular
                      ? regular_cache_prob(result.outgoing_cache, config.cache)
                      : neural_cache_prob(result.outgoing_cache, step.hidden, config.cache);
      }
      Eigen::VectorXd mixed =
          config.mix.mode == MixMode::kLinear
              ? mix_linear(step.probs, p_cache, config.mix.lambda_interp)
              : mix_iw(step.probs, p_cache, config.mix.gamma, *config.iw);
      const double lstm_lp = log_prob_of(mixed, target);
      if (lam == 1.0) {
        event_lp = lstm_lp;
      } else {
        // log of (1-lam) e^ngram_lp + lam e^lstm_lp, stably.
        const double a = std::log1p(-lam) + ngram_lp;
        const double b = std::log(lam) + lstm_lp;
        const double m = std::max(a, b);
        event_lp = m + std::log(std::exp(a - m) + std::exp(b - m));
      }
    }
    result.event_log_probs.push_back(event_lp);

    const double w_lambda = config.iw != nullptr ? config.iw->of(target) : 0.0;
    cache_insert(result.outgoing_cache, target, step.hidden, w_lambda, config.cache);
    input = target;
  }

  if (lam == 0.0) {
    result.lm_log_sum = hyp.ngram_logp;  // exact collapse, no per-event rounding
    if (per_word) {
      result.lm_log_sum = 0.0;
      for (double lp : hyp.word_ngram_logps) result.lm_log_sum += lp;
    }
  } else {
    result.lm_log_sum = 0.0;
    for (double lp : result.event_log_probs) result.lm_log_sum += lp;
  }
  result.total = hyp.acoustic_logp + config.lm_scale * result.lm_log_sum +
                 hyp.word_count() * config.word_insertion_penalty;
  return result;
}

struct HypothesisScore {
  double total = 0.0;
  double acoustic_logp = 0.0;
  double ngram_logp = 0.0;
  double lm_log_sum = 0.0;
  int32_t word_count = 0;
  std::vector<double> event_log_probs;
  bool selected = false;
};

struct UttResult {
  std::string utterance_id;
  int32_t selected_index = 0;
  std::vector<HypothesisScore> scores;
};

struct SessionResult {
  std::vector<UttResult> utterances;
  CacheState final_cache;  // session cache after the last utterance

  std::vector<Transcript> selections(const std::vector<NBestList>& lists) const {
    std::vector<Transcript> out;
    out.reserve(utterances.size());
    for (size_t u = 0; u < utterances.size(); ++u) {
      const auto& sel = lists[u].hypotheses[static_cast<size_t>(utterances[u].selected_index)];
      out.push_back(Transcript{utterances[u].utterance_id, sel.words});
    }
    return out;
  }
};

/// Rescores consecutive N-best lists. Every hypothesis is scored from a
/// clone of the session cache; the argmax (ties to the lowest index) is
/// selected, and with transfer_cache on, the session cache becomes the
/// winner's outgoing cache. The session cache starts empty.
template <typename T>
SessionResult rescore_session(const LstmModel<T>& model, const Vocabulary& vocab,
                              const std::vector<NBestList>& lists,
                              const RescoreConfig& config) {
  config.validate();
  SessionResult result;
  result.utterances.reserve(lists.size());
  CacheState session_cache;

  for (const auto& list : lists) {
    if (list.hypotheses.empty()) {
      throw std::runtime_error("rescore_session: utterance '" + list.utterance_id +
                               "' has an empty N-best list");
    }
    UttResult utt;
    utt.utterance_id = list.utterance_id;
    utt.scores.reserve(list.hypotheses.size());

    CacheState best_cache;
    double best_total = 0.0;
    for (size_t k = 0; k < list.hypotheses.size(); ++k) {
      const Hypothesis& hyp = list.hypotheses[k];
      ScoredHypothesis scored = score_hypothesis(model, vocab, hyp, session_cache, config);
      if (k == 0 || scored.total > best_total) {
        best_total = scored.total;
        utt.selected_index = static_cast<int32_t>(k);
        best_cache = std::move(scored.outgoing_cache);
      }
      HypothesisScore row;
      row.total = scored.total;
      row.acoustic_logp = hyp.acoustic_logp;
      row.ngram_logp = hyp.ngram_logp;
      row.lm_log_sum = scored.lm_log_sum;
      row.word_count = hyp.word_count();
      row.event_log_probs = std::move(scored.event_log_probs);
      utt.scores.push_back(std::move(row));
    }
    utt.scores[static_cast<size_t>(utt.selected_index)].selected = true;
    if (config.transfer_cache) session_cache = std::move(best_cache);
    result.utterances.push_back(std::move(utt));
  }
  result.final_cache = std::move(session_cache);
  return result;
}

/// Exhaustive hyperparameter grid for rescoring. Empty dimensions inherit
/// the base configuration's value; the grid must sweep at least one
/// dimension. interp is the linear lambda or the IW gamma depending on the
/// mix mode of the base configuration.
struct GridSpec {
  std::vector<double> lambda_lstm;
  std::vector<double> beta;
  std::vector<double> omega;
  std::vector<double> interp;
  std::vector<double> phi;
  std::vector<double> theta;
  std::vector<double> alpha;
};

struct GridPoint {
  double lambda_lstm = 0.0;
  double beta = 0.0;
  double omega = 0.0;
  double interp = 0.0;
  double phi = 0.0;
  double theta = 0.0;
  double alpha = 0.0;
  double wer = 0.0;
};

struct GridResult {
  std::vector<GridPoint> points;  // in evaluation order
  GridPoint best;
  RescoreConfig best_config;
};

namespace detail {

inline RescoreConfig apply_grid_point(const RescoreConfig& base, const GridPoint& p) {
  RescoreConfig cfg = base;
  cfg.lambda_lstm = p.lambda_lstm;
  cfg.lm_scale = p.beta;
  cfg.word_insertion_penalty = p.omega;
  if (cfg.mix.mode == MixMode::kLinear) {
    cfg.mix.lambda_interp = p.interp;
  } else {
    cfg.mix.gamma = p.interp;
  }
  cfg.cache.selective_threshold = p.phi;
  cfg.cache.flatness = p.theta;
  cfg.cache.decay = p.alpha;
  return cfg;
}

}  // namespace detail

/// Evaluates every grid point by full session rescoring against the
/// references and returns the configuration with the lowest WER. Points
/// are visited with the interpolation weight as the slowest axis, then
/// beta, so WER ties resolve toward smaller lambda/gamma, then smaller
/// beta.
template <typename T>
GridResult grid_search(const LstmModel<T>& model, const Vocabulary& vocab,
                       const std::vector<NBestList>& lists,
                       const std::vector<Transcript>& references, const RescoreConfig& base,
                       const GridSpec& spec) {
  base.validate();
  std::unordered_map<std::string, const Transcript*> ref_by_id;
  for (const auto& r : references) ref_by_id[r.utterance_id] = &r;
  for (const auto& list : lists) {
    if (!ref_by_id.count(list.utterance_id)) {
      throw std::runtime_error("grid_search: no reference for utterance '" + list.utterance_id +
                               "'");
    }
  }

  const bool all_empty = spec.lambda_lstm.empty() && spec.beta.empty() && spec.omega.empty() &&
                         spec.interp.empty() && spec.phi.empty() && spec.theta.empty() &&
                         spec.alpha.empty();
  if (all_empty) throw std::invalid_argument("grid_search: empty grid");

  auto axis = [](std::vector<double> v, double fallback) {
    if (v.empty()) v.push_back(fallback);
    std::sort(v.begin(), v.end());
    return v;
  };
  const double base_interp =
      base.mix.mode == MixMode::kLinear ? base.mix.lambda_interp : base.mix.gamma;
  const auto interps = axis(spec.interp, base_interp);
  const auto betas = axis(spec.beta, base.lm_scale);
  const auto omegas = axis(spec.omega, base.word_insertion_penalty);
  const auto lambdas = axis(spec.lambda_lstm, base.lambda_lstm);
  const auto phis = axis(spec.phi, base.cache.selective_threshold);
  const auto thetas = axis(spec.theta, base.cache.flatness);
  const auto alphas = axis(spec.alpha, base.cache.decay);

  GridResult result;
  bool first = true;
  for (double interp : interps)
    for (double beta : betas)
      for (double omega : omegas)
        for (double lambda : lambdas)
          for (double phi : phis)
            for (double theta : thetas)
              for (double alpha : alphas) {
                GridPoint p{lambda, beta, omega, interp, phi, theta, alpha, 0.0};
                const RescoreConfig cfg = detail::apply_grid_point(base, p);
                SessionResult session = rescore_session(model, vocab, lists, cfg);
                std::vector<UttErrors> errors;
                errors.reserve(lists.size());
                for (size_t u = 0; u < lists.size(); ++u) {
                  const auto& sel =
                      lists[u].hypotheses[static_cast<size_t>(session.utterances[u].selected_index)];
                  UttErrors e = align_wer(ref_by_id[lists[u].utterance_id]->words, sel.words);
                  e.utterance_id = lists[u].utterance_id;
                  errors.push_back(e);
                }
                p.wer = corpus_wer(errors);
                result.points.push_back(p);
                if (first || p.wer < result.best.wer) {
                  first = false;
                  result.best = p;
                  result.best_config = cfg;
                }
              }
  return result;
}

inline void write_grid_report(const GridResult& grid, std::ostream& out) {
  out << "lambda_lstm\tbeta\tomega\tinterp\tphi\ttheta\talpha\twer\n";
  char buf[256];
  for (const auto& p : grid.points) {
    std::snprintf(buf, sizeof(buf), "%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                  p.lambda_lstm, p.beta, p.omega, p.interp, p.phi, p.theta, p.alpha, p.wer);
    out << buf;
  }
}

inline void write_score_table(const SessionResult& session, std::ostream& out) {
  out << "utt_id\thyp\tselected\tacoustic_logp\tngram_logp\tlm_log_sum\twords\ttotal\tevent_log_probs\n";
  char buf[256];
  for (const auto& utt : session.utterances) {
    for (size_t k = 0; k < utt.scores.size(); ++k) {
      const auto& s = utt.scores[k];
      std::snprintf(buf, sizeof(buf), "%s\t%zu\t%d\t%.17g\t%.17g\t%.17g\t%d\t%.17g\t",
                    utt.utterance_id.c_str(), k, s.selected ? 1 : 0, s.acoustic_logp,
                    s.ngram_logp, s.lm_log_sum, s.word_count, s.total);
      out << buf;
      for (size_t e = 0; e < s.event_log_probs.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%s%.17g", e ? " " : "", s.event_log_probs[e]);
        out << buf;
      }
      out << "\n";
    }
  }
}

}  // namespace cachelm
