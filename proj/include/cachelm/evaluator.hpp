#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "cachelm/cache.hpp"
#include "cachelm/corpus.hpp"
#include "cachelm/info_weight.hpp"
#include "cachelm/lstm.hpp"
#include "cachelm/mixer.hpp"

namespace cachelm {

/// Counters for one information-weight range (or an aggregate): how often
/// the interpolated probability was at least the baseline LM probability,
/// and the mean relative improvement over the tokens where it was higher.
struct ProbCompareStats {
  int64_t tokens = 0;
  int64_t ge_baseline = 0;
  int64_t higher = 0;
  double rel_improvement_sum = 0.0;

  double fraction_ge() const {
    return tokens == 0 ? 0.0 : static_cast<double>(ge_baseline) / static_cast<double>(tokens);
  }
  double mean_rel_improvement() const {
    return higher == 0 ? 0.0 : rel_improvement_sum / static_cast<double>(higher);
  }

  void record(double interpolated, double baseline) {
    ++tokens;
    if (interpolated >= baseline) ++ge_baseline;
    if (interpolated > baseline) {
      ++higher;
      rel_improvement_sum += (interpolated - baseline) / baseline;
    }
  }
};

inline constexpr int kNumBuckets = 5;  // [0,0.2) [0.2,0.4) [0.4,0.6) [0.6,0.8) [0.8,1.0]

inline int bucket_of(double lambda) {
  int b = static_cast<int>(lambda * kNumBuckets);
  return b >= kNumBuckets ? kNumBuckets - 1 : b;
}

struct EvalReport {
  double perplexity = 0.0;
  int64_t token_count = 0;
  int64_t floor_events = 0;
  double sum_log_prob = 0.0;

  // Present when an info-weight table was supplied to the evaluation.
  bool has_buckets = false;
  std::array<ProbCompareStats, kNumBuckets> buckets;
  ProbCompareStats all;
  ProbCompareStats above_cut;  // tokens with lambda > lambda_cut
  double lambda_cut = 0.2;
};

struct EvalConfig {
  CacheConfig cache;
  MixConfig mix;
  SequenceMode mode = SequenceMode::kDiscourse;
  bool reset_cache_at_eos = false;  // sentence mode only
  const InfoWeights* iw = nullptr;
  double lambda_cut = 0.2;  // threshold for the above_cut aggregate

  /// Plain LM evaluation: cache disabled, mixing an exact identity.
  static EvalConfig baseline(SequenceMode mode) {
    EvalConfig cfg;
    cfg.cache.capacity = 0;
    cfg.mix.mode = MixMode::kLinear;
    cfg.mix.lambda_interp = 0.0;
    cfg.mode = mode;
    return cfg;
  }

  void validate(int32_t vocab_size) const {
    cache.validate();
    mix.validate();
    if (mix.mode == MixMode::kInfoWeighted && iw == nullptr) {
      throw std::invalid_argument("eval: information-weighted mixing requires an IW table");
    }
    if (cache.selective_threshold > 0.0 && iw == nullptr) {
      throw std::invalid_argument("eval: a selective cache requires an IW table");
    }
    if (iw != nullptr && iw->size() != vocab_size) {
      throw std::runtime_error("eval: IW table size does not match the model vocabulary");
    }
  }
};

/// Single left-to-right teacher-forced pass. At each step the LSTM is
/// advanced, the cache distribution built and mixed with the LM
/// distribution, the target scored, and (target, h_t) offered to the
/// cache. The first token is predicted from <eos>; sentence mode zeroes
/// the LSTM state after each <eos> target.
template <typename T>
EvalReport evaluate_perplexity(const LstmModel<T>& model, const TokenStream& stream,
                               const EvalConfig& config) {
  if (stream.vocab_size != model.vocab_size()) {
    throw std::runtime_error("evaluate_perplexity: stream vocabulary (" +
                             std::to_string(stream.vocab_size) + ") does not match the model (" +
                             std::to_string(model.vocab_size()) + ")");
  }
  if (stream.tokens.empty()) {
    throw std::runtime_error("evaluate_perplexity: empty stream");
  }
  config.validate(model.vocab_size());

  EvalReport report;
  report.has_buckets = config.iw != nullptr;
  report.lambda_cut = config.lambda_cut;

  LstmState<T> state = LstmState<T>::zero(model.hidden_size());
  CacheState cache;
  int32_t input = stream.eos_id;

  for (int32_t target : stream.tokens) {
    LmStep step = forward_step(model, input, state);

    SparseProbs p_cache;
    if (!cache.empty()) {
      p_cache = config.cache.kind == CacheKind::kRegular
                    ? regular_cache_prob(cache, config.cache)
                    : neural_cache_prob(cache, step.hidden, config.cache);
    }
    Eigen::VectorXd mixed = config.mix.mode == MixMode::kLinear
                                ? mix_linear(step.probs, p_cache, config.mix.lambda_interp)
                                : mix_iw(step.probs, p_cache, config.mix.gamma, *config.iw);

    report.sum_log_prob += log_prob_of(mixed, target, &report.floor_events);
    ++report.token_count;

    if (report.has_buckets) {
      const double lam = config.iw->of(target);
      const double interpolated = mixed[target];
      const double baseline = step.probs[target];
      report.buckets[static_cast<size_t>(bucket_of(lam))].record(interpolated, baseline);
      report.all.record(interpolated, baseline);
      if (lam > config.lambda_cut) report.above_cut.record(interpolated, baseline);
    }

    const double lam = config.iw != nullptr ? config.iw->of(target) : 0.0;
    cache_insert(cache, target, step.hidden, lam, config.cache);

    if (config.mode == SequenceMode::kSentence && target == stream.eos_id) {
      state = LstmState<T>::zero(model.hidden_size());
      if (config.reset_cache_at_eos) cache = CacheState{};
    }
    input = target;
  }

  report.perplexity =
      std::exp(-report.sum_log_prob / static_cast<double>(report.token_count));
  return report;
}

/// Two labeled evaluation passes over the same stream, typically a
/// non-selective configuration against a selective one, for comparing how
/// often each interpolation beats the plain LM across IW ranges.
struct BucketAnalysis {
  EvalReport series_a;
  EvalReport series_b;
  std::string name_a;
  std::string name_b;
};

template <typename T>
BucketAnalysis bucket_analysis(const LstmModel<T>& model, const TokenStream& stream,
                               const EvalConfig& config_a, const EvalConfig& config_b,
                               const std::string& name_a = "a",
                               const std::string& name_b = "b") {
  if (config_a.iw == nullptr || config_b.iw == nullptr) {
    throw std::invalid_argument("bucket_analysis: both configurations need an IW table");
  }
  BucketAnalysis out;
  out.series_a = evaluate_perplexity(model, stream, config_a);
  out.series_b = evaluate_perplexity(model, stream, config_b);
  out.name_a = name_a;
  out.name_b = name_b;
  return out;
}

inline const char* bucket_label(int b) {
  static const char* labels[kNumBuckets] = {"0.0-0.2", "0.2-0.4", "0.4-0.6", "0.6-0.8",
                                            "0.8-1.0"};
  return labels[b];
}

inline void write_eval_report_tsv(const EvalReport& r, std::ostream& out) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), "perplexity\t%.17g\n", r.perplexity);
  out << buf;
  out << "token_count\t" << r.token_count << "\n";
  out << "floor_events\t" << r.floor_events << "\n";
  if (!r.has_buckets) return;
  out << "bucket\trange\ttokens\tfrac_ge_baseline\tmean_rel_improvement_when_higher\n";
  for (int b = 0; b < kNumBuckets; ++b) {
    const auto& s = r.buckets[static_cast<size_t>(b)];
    std::snprintf(buf, sizeof(buf), "bucket\t%s\t%lld\t%.17g\t%.17g\n", bucket_label(b),
                  static_cast<long long>(s.tokens), s.fraction_ge(), s.mean_rel_improvement());
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "agg\tall\t%lld\t%.17g\t%.17g\n",
                static_cast<long long>(r.all.tokens), r.all.fraction_ge(),
                r.all.mean_rel_improvement());
  out << buf;
  std::snprintf(buf, sizeof(buf), "agg\tlambda>%g\t%lld\t%.17g\t%.17g\n", r.lambda_cut,
                static_cast<long long>(r.above_cut.tokens), r.above_cut.fraction_ge(),
                r.above_cut.mean_rel_improvement());
  out << buf;
}

/// Aligned text table of the two series' per-bucket fractions, one bar
/// per bucket and series.
inline void print_bucket_table(const BucketAnalysis& a, std::ostream& out) {
  out << "% interpolated prob >= LM prob, by information-weight range\n";
  for (int b = 0; b < kNumBuckets; ++b) {
    for (int s = 0; s < 2; ++s) {
      const EvalReport& r = s == 0 ? a.series_a : a.series_b;
      const std::string& name = s == 0 ? a.name_a : a.name_b;
      const double pct = 100.0 * r.buckets[static_cast<size_t>(b)].fraction_ge();
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s  %-12s %5.1f%% |", bucket_label(b), name.c_str(), pct);
      out << buf;
      const int bars = static_cast<int>(pct / 2.0 + 0.5);
      for (int k = 0; k < bars; ++k) out << '#';
      out << "\n";
    }
  }
}

}  // namespace cachelm
