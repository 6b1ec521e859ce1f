#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "cachelm/vocab.hpp"

namespace cachelm {

inline constexpr size_t kMaxHypothesesPerList = 1000;

/// One first-pass hypothesis: words plus acoustic and n-gram LM log
/// scores. word_ngram_logps, when present, carries one value per word
/// plus one for the end-of-sentence event.
struct Hypothesis {
  std::vector<std::string> words;
  double acoustic_logp = 0.0;
  double ngram_logp = 0.0;
  std::vector<double> word_ngram_logps;  // empty, or words.size() + 1 values

  int32_t word_count() const { return static_cast<int32_t>(words.size()); }
};

struct NBestList {
  std::string utterance_id;
  std::vector<Hypothesis> hypotheses;
};

/// N-best TSV: `utt_id<TAB>rank<TAB>acoustic_logp<TAB>ngram_logp<TAB>words`
/// with an optional fifth column of per-word n-gram log probs (one per
/// word plus one for <eos>). Utterances appear in spoken order; ranks run
/// 0..n-1 within each utterance.
inline std::vector<NBestList> read_nbest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_nbest: cannot open " + path);

  std::vector<NBestList> lists;
  std::unordered_set<std::string> finished;
  std::string line;
  size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 5 || fields.size() > 6) {
      fail("expected utt_id<TAB>rank<TAB>acoustic<TAB>ngram<TAB>words[<TAB>word_logps]");
    }

    const std::string& utt = fields[0];
    if (utt.empty()) fail("empty utterance id");
    if (lists.empty() || lists.back().utterance_id != utt) {
      if (finished.count(utt)) fail("utterance '" + utt + "' appears twice, non-contiguously");
      if (!lists.empty()) finished.insert(lists.back().utterance_id);
      lists.push_back(NBestList{utt, {}});
    }
    NBestList& list = lists.back();

    int64_t rank = -1;
    try {
      rank = std::stoll(fields[1]);
    } catch (const std::exception&) {
      fail("non-numeric rank '" + fields[1] + "'");
    }
    if (rank != static_cast<int64_t>(list.hypotheses.size())) {
      fail("rank " + fields[1] + " out of order for utterance '" + utt + "'");
    }
    if (list.hypotheses.size() >= kMaxHypothesesPerList) {
      fail("more than " + std::to_string(kMaxHypothesesPerList) + " hypotheses for '" + utt + "'");
    }

    Hypothesis hyp;
    try {
      hyp.acoustic_logp = std::stod(fields[2]);
      hyp.ngram_logp = std::stod(fields[3]);
    } catch (const std::exception&) {
      fail("non-numeric score");
    }
    if (!std::isfinite(hyp.acoustic_logp) || !std::isfinite(hyp.ngram_logp)) {
      fail("non-finite score");
    }
    hyp.words = split_tokens(fields[4]);
    if (fields.size() == 6) {
      for (const auto& tok : split_tokens(fields[5])) {
        try {
          hyp.word_ngram_logps.push_back(std::stod(tok));
        } catch (const std::exception&) {
          fail("non-numeric per-word log prob '" + tok + "'");
        }
      }
      if (hyp.word_ngram_logps.size() != hyp.words.size() + 1) {
        fail("per-word column must hold one value per word plus one for <eos> (" +
             std::to_string(hyp.words.size() + 1) + " values)");
      }
    }
    list.hypotheses.push_back(std::move(hyp));
  }
  for (const auto& list : lists) {
    if (list.hypotheses.empty()) {
      throw std::runtime_error(path + ": utterance '" + list.utterance_id + "' has no hypotheses");
    }
  }
  return lists;
}

/// Reference / selection format: `utt_id<TAB>word1 word2 ...`.
struct Transcript {
  std::string utterance_id;
  std::vector<std::string> words;
};

inline std::vector<Transcript> read_transcript_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_transcripts: cannot open " + path);
  std::vector<Transcript> out;
  std::unordered_set<std::string> seen;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected utt_id<TAB>words");
    }
    Transcript t;
    t.utterance_id = line.substr(0, tab);
    t.words = split_tokens(line.substr(tab + 1));
    if (!seen.insert(t.utterance_id).second) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": duplicate utterance '" +
                               t.utterance_id + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_transcript_file(const std::vector<Transcript>& transcripts,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_transcripts: cannot open " + path + " for writing");
  for (const auto& t : transcripts) {
    out << t.utterance_id << '\t';
    for (size_t k = 0; k < t.words.size(); ++k) {
      if (k) out << ' ';
      out << t.words[k];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_transcripts: write failed for " + path);
}

}  // namespace cachelm
