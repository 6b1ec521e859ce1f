#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachelm/vocab.hpp"

namespace cachelm {

/// A tokenized corpus: word ids with one <eos> appended per input line.
/// sentence_boundaries holds the positions of those <eos> tokens.
struct TokenStream {
  std::vector<int32_t> tokens;
  std::vector<size_t> sentence_boundaries;
  int32_t vocab_size = 0;
  int32_t eos_id = -1;

  size_t size() const { return tokens.size(); }
  size_t sentence_count() const { return sentence_boundaries.size(); }
};

/// Maps pre-tokenized lines to ids, appending <eos> per line. Unknown words
/// become <unk>; empty lines are skipped.
inline TokenStream tokenize(const std::vector<std::string>& lines, const Vocabulary& vocab) {
  TokenStream stream;
  stream.vocab_size = vocab.size();
  stream.eos_id = vocab.eos_id();
  for (const auto& line : lines) {
    auto toks = split_tokens(line);
    if (toks.empty()) continue;
    for (const auto& t : toks) stream.tokens.push_back(vocab.lookup(t));
    stream.tokens.push_back(vocab.eos_id());
    stream.sentence_boundaries.push_back(stream.tokens.size() - 1);
  }
  return stream;
}

/// Inverse of tokenize: ids back to surface forms (unknowns come back as
/// the <unk> surface form), one sentence per line split at <eos>.
inline std::vector<std::string> detokenize(const TokenStream& stream, const Vocabulary& vocab) {
  std::vector<std::string> lines;
  std::string current;
  for (int32_t id : stream.tokens) {
    if (id == vocab.eos_id()) {
      lines.push_back(current);
      current.clear();
    } else {
      if (!current.empty()) current += ' ';
      current += vocab.word(id);
    }
  }
  if (!current.empty()) lines.push_back(current);
  return lines;
}

/// Corpus split into equal-sentence-count chunks; each chunk is a token-id
/// multiset (id -> count). Feeds the information-weight computation.
struct DocumentChunks {
  std::vector<std::unordered_map<int32_t, int64_t>> chunks;
  int32_t chunk_size_sentences = 0;
  int32_t vocab_size = 0;

  size_t num_chunks() const { return chunks.size(); }

  int64_t total_tokens() const {
    int64_t total = 0;
    for (const auto& chunk : chunks)
      for (const auto& [id, count] : chunk) total += count;
    return total;
  }
};

/// Splits the stream into documents of sentences_per_chunk sentences each
/// (the last chunk may be short). Tokens after the final <eos> join the
/// last chunk so token counts are conserved.
inline DocumentChunks chunk_documents(const TokenStream& stream, int32_t sentences_per_chunk) {
  if (sentences_per_chunk < 1) {
    throw std::invalid_argument("chunk_documents: sentences_per_chunk must be >= 1");
  }
  if (stream.sentence_count() == 0) {
    throw std::runtime_error("chunk_documents: stream contains no sentences");
  }
  DocumentChunks docs;
  docs.chunk_size_sentences = sentences_per_chunk;
  docs.vocab_size = stream.vocab_size;
  docs.chunks.emplace_back();
  int32_t sentences_in_chunk = 0;
  size_t boundary_cursor = 0;  // sentence_boundaries is sorted
  for (size_t pos = 0; pos < stream.tokens.size(); ++pos) {
    ++docs.chunks.back()[stream.tokens[pos]];
    if (boundary_cursor < stream.sentence_boundaries.size() &&
        stream.sentence_boundaries[boundary_cursor] == pos) {
      ++boundary_cursor;
      ++sentences_in_chunk;
      if (sentences_in_chunk == sentences_per_chunk && pos + 1 < stream.tokens.size()) {
        docs.chunks.emplace_back();
        sentences_in_chunk = 0;
      }
    }
  }
  return docs;
}

/// One truncated-BPTT block: row-major [batch][steps] inputs and targets,
/// target[b][t] == input[b][t+1] within a lane.
struct Batch {
  int32_t batch_size = 0;
  int32_t steps = 0;
  std::vector<int32_t> input;
  std::vector<int32_t> target;

  int32_t in(int32_t b, int32_t t) const { return input[static_cast<size_t>(b) * steps + t]; }
  int32_t out(int32_t b, int32_t t) const { return target[static_cast<size_t>(b) * steps + t]; }
};

/// Splits the stream into batch_size contiguous lanes and yields
/// (input, target) blocks of unroll_steps; hidden state carries over
/// between consecutive blocks within a lane.
class BatchIterator {
 public:
  BatchIterator(const TokenStream& stream, int32_t batch_size, int32_t unroll_steps)
      : stream_(&stream), batch_size_(batch_size), unroll_steps_(unroll_steps) {
    if (batch_size < 1 || unroll_steps < 1) {
      throw std::invalid_argument("batch_iterator: batch_size and unroll_steps must be >= 1");
    }
    const size_t need = static_cast<size_t>(batch_size) * unroll_steps + 1;
    if (stream.size() < need) {
      throw std::runtime_error("batch_iterator: stream of " + std::to_string(stream.size()) +
                               " tokens is too short for batch " + std::to_string(batch_size) +
                               " x unroll " + std::to_string(unroll_steps));
    }
    lane_length_ = stream.size() / batch_size;
    num_blocks_ = static_cast<int32_t>((lane_length_ - 1) / unroll_steps);
  }

  int32_t num_blocks() const { return num_blocks_; }
  size_t lane_length() const { return lane_length_; }

  bool has_next() const { return block_ < num_blocks_; }

  Batch next() {
    if (!has_next()) throw std::runtime_error("batch_iterator: exhausted");
    Batch b;
    b.batch_size = batch_size_;
    b.steps = unroll_steps_;
    b.input.resize(static_cast<size_t>(batch_size_) * unroll_steps_);
    b.target.resize(b.input.size());
    const size_t offset = static_cast<size_t>(block_) * unroll_steps_;
    for (int32_t lane = 0; lane < batch_size_; ++lane) {
      const size_t base = static_cast<size_t>(lane) * lane_length_ + offset;
      for (int32_t t = 0; t < unroll_steps_; ++t) {
        b.input[static_cast<size_t>(lane) * unroll_steps_ + t] = stream_->tokens[base + t];
        b.target[static_cast<size_t>(lane) * unroll_steps_ + t] = stream_->tokens[base + t + 1];
      }
    }
    ++block_;
    return b;
  }

  void reset() { block_ = 0; }

 private:
  const TokenStream* stream_;
  int32_t batch_size_;
  int32_t unroll_steps_;
  size_t lane_length_ = 0;
  int32_t num_blocks_ = 0;
  int32_t block_ = 0;
};

}  // namespace cachelm
