#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelm/rng.hpp"

namespace cachelm {

/// Per-utterance alignment errors against a reference transcript.
struct UttErrors {
  std::string utterance_id;
  int32_t substitutions = 0;
  int32_t insertions = 0;
  int32_t deletions = 0;
  int32_t ref_len = 0;

  int32_t total() const { return substitutions + insertions + deletions; }
};

/// Minimal-cost Levenshtein alignment with unit costs. Ties are resolved
/// deterministically: substitution (or match) over insertion over deletion.
inline UttErrors align_wer(const std::vector<std::string>& ref,
                           const std::vector<std::string>& hyp) {
  const size_t n = ref.size();
  const size_t m = hyp.size();
  // op per cell: 0 = diagonal (match/sub), 1 = insertion, 2 = deletion
  std::vector<int32_t> cost((n + 1) * (m + 1));
  std::vector<uint8_t> op((n + 1) * (m + 1));
  auto at = [m](size_t i, size_t j) { return i * (m + 1) + j; };

  for (size_t j = 0; j <= m; ++j) {
    cost[at(0, j)] = static_cast<int32_t>(j);
    op[at(0, j)] = 1;
  }
  for (size_t i = 0; i <= n; ++i) {
    cost[at(i, 0)] = static_cast<int32_t>(i);
    op[at(i, 0)] = 2;
  }
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      const int32_t diag = cost[at(i - 1, j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      const int32_t ins = cost[at(i, j - 1)] + 1;
      const int32_t del = cost[at(i - 1, j)] + 1;
      int32_t best = diag;
      uint8_t best_op = 0;
      if (ins < best) {
        best = ins;
        best_op = 1;
      }
      if (del < best) {
        best = del;
        best_op = 2;
      }
      cost[at(i, j)] = best;
      op[at(i, j)] = best_op;
    }
  }

  UttErrors e;
  e.ref_len = static_cast<int32_t>(n);
  size_t i = n, j = m;
  while (i > 0 || j > 0) {
    switch (op[at(i, j)]) {
      case 0:
        if (ref[i - 1] != hyp[j - 1]) ++e.substitutions;
        --i;
        --j;
        break;
      case 1:
        ++e.insertions;
        --j;
        break;
      default:
        ++e.deletions;
        --i;
        break;
    }
  }
  return e;
}

/// 100 * total errors / total reference words.
inline double corpus_wer(const std::vector<UttErrors>& errors) {
  if (errors.empty()) throw std::runtime_error("corpus_wer: no utterances");
  int64_t errs = 0, ref = 0;
  for (const auto& e : errors) {
    errs += e.total();
    ref += e.ref_len;
  }
  if (ref == 0) throw std::runtime_error("corpus_wer: total reference length is zero");
  return 100.0 * static_cast<double>(errs) / static_cast<double>(ref);
}

struct BootstrapResult {
  double poi = 0.0;  // probability of improvement of B over A, percent
  int64_t samples = 0;
  uint64_t seed = 0;
};

/// Paired bootstrap probability of improvement of system B over A:
/// utterances are resampled with replacement with the same indices for
/// both systems and total errors compared; ties count 0.5 toward B, so
/// poi(A,B) + poi(B,A) = 100 and poi(A,A) = 50 exactly. Replicate r draws
/// from the substream seeded with splitmix64(seed ^ (r+1)*0x9e3779b97f4a7c15).
inline BootstrapResult bootstrap_poi(const std::vector<UttErrors>& errors_a,
                                     const std::vector<UttErrors>& errors_b,
                                     int64_t samples = 10000, uint64_t seed = 0) {
  if (samples < 1) throw std::invalid_argument("bootstrap_poi: samples must be >= 1");
  if (errors_a.empty()) throw std::runtime_error("bootstrap_poi: no utterances");
  if (errors_a.size() != errors_b.size()) {
    throw std::runtime_error("bootstrap_poi: utterance sets differ in size");
  }
  // Pair B's utterances with A's by id.
  std::unordered_map<std::string, size_t> b_index;
  b_index.reserve(errors_b.size());
  for (size_t k = 0; k < errors_b.size(); ++k) {
    if (!b_index.emplace(errors_b[k].utterance_id, k).second) {
      throw std::runtime_error("bootstrap_poi: duplicate utterance id '" +
                               errors_b[k].utterance_id + "'");
    }
  }
  const size_t n = errors_a.size();
  std::vector<int64_t> err_a(n), err_b(n);
  for (size_t k = 0; k < n; ++k) {
    auto it = b_index.find(errors_a[k].utterance_id);
    if (it == b_index.end()) {
      throw std::runtime_error("bootstrap_poi: utterance '" + errors_a[k].utterance_id +
                               "' missing from system B");
    }
    err_a[k] = errors_a[k].total();
    err_b[k] = errors_b[it->second].total();
  }

  double wins_b = 0.0;
  for (int64_t r = 0; r < samples; ++r) {
    std::mt19937_64 gen(
        splitmix64(seed ^ (static_cast<uint64_t>(r) + 1) * 0x9e3779b97f4a7c15ull));
    int64_t total_a = 0, total_b = 0;
    for (size_t k = 0; k < n; ++k) {
      const size_t idx = static_cast<size_t>(uniform_index(gen, n));
      total_a += err_a[idx];
      total_b += err_b[idx];
    }
    if (total_b < total_a) {
      wins_b += 1.0;
    } else if (total_b == total_a) {
      wins_b += 0.5;
    }
  }

  BootstrapResult res;
  res.poi = 100.0 * wins_b / static_cast<double>(samples);
  res.samples = samples;
  res.seed = seed;
  return res;
}

}  // namespace cachelm
