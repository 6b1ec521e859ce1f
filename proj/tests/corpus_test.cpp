#include "cachelm/corpus.hpp"

#include <gtest/gtest.h>

#include <random>

#include "cachelm/rng.hpp"
#include "cachelm/vocab.hpp"

using namespace cachelm;

TEST(Vocabulary, KeepsAllWordsAboveMinCount) {
  Vocabulary v = build_vocabulary({"a a b"}, 1);
  EXPECT_EQ(v.size(), 4);  // a, b, <unk>, <eos>
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("b"));
  EXPECT_NE(v.lookup("a"), v.unk_id());
  EXPECT_NE(v.unk_id(), v.eos_id());
}

TEST(Vocabulary, MinCountMapsRareWordsToUnk) {
  Vocabulary v = build_vocabulary({"a a b"}, 2);
  EXPECT_EQ(v.lookup("b"), v.unk_id());
  EXPECT_NE(v.lookup("a"), v.unk_id());
}

TEST(Vocabulary, EmptyCorpusIsAnError) {
  EXPECT_THROW(build_vocabulary({}, 1), std::runtime_error);
  EXPECT_THROW(build_vocabulary({"", "   "}, 1), std::runtime_error);
}

TEST(Vocabulary, OrderIsFrequencyThenLexicographic) {
  Vocabulary v = build_vocabulary({"b a b a c"}, 1);
  // ids: 0=<unk>, 1=<eos>, then a (tie with b, lex first), b, c
  EXPECT_EQ(v.lookup("a"), 2);
  EXPECT_EQ(v.lookup("b"), 3);
  EXPECT_EQ(v.lookup("c"), 4);
}

TEST(Vocabulary, MaxSizeCapsRegularWords) {
  Vocabulary v = build_vocabulary({"a a a b b c"}, 1, 2);
  EXPECT_EQ(v.size(), 4);
  EXPECT_EQ(v.lookup("c"), v.unk_id());
}

TEST(Vocabulary, LiteralUnkInCorpusIsNotDuplicated) {
  Vocabulary v = build_vocabulary({"x <unk> x <unk> <unk>"}, 1);
  EXPECT_EQ(v.size(), 3);  // <unk>, <eos>, x
  EXPECT_EQ(v.lookup("<unk>"), v.unk_id());
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  Vocabulary v = build_vocabulary({"the cat sat on the mat"}, 1);
  const std::string path = testing::TempDir() + "/vocab.txt";
  v.save(path);
  Vocabulary loaded = Vocabulary::load(path);
  ASSERT_EQ(loaded.size(), v.size());
  for (int32_t id = 0; id < v.size(); ++id) EXPECT_EQ(loaded.word(id), v.word(id));
  EXPECT_EQ(loaded.unk_id(), v.unk_id());
  EXPECT_EQ(loaded.eos_id(), v.eos_id());
  EXPECT_EQ(loaded.hash(), v.hash());
}

TEST(Tokenize, AppendsEosPerLine) {
  Vocabulary v = build_vocabulary({"a b"}, 1);
  TokenStream s = tokenize({"a b"}, v);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.tokens[0], v.lookup("a"));
  EXPECT_EQ(s.tokens[1], v.lookup("b"));
  EXPECT_EQ(s.tokens[2], v.eos_id());
}

TEST(Tokenize, UnknownWordsMapToUnk) {
  Vocabulary v = build_vocabulary({"a b"}, 1);
  TokenStream s = tokenize({"a z"}, v);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.tokens[1], v.unk_id());
}

TEST(Tokenize, TwoLinesConcatenateWithEosInline) {
  Vocabulary v = build_vocabulary({"a b c d"}, 1);
  TokenStream s = tokenize({"a b", "c d"}, v);
  ASSERT_EQ(s.size(), 6u);
  EXPECT_EQ(s.tokens[2], v.eos_id());
  EXPECT_EQ(s.tokens[5], v.eos_id());
  ASSERT_EQ(s.sentence_boundaries.size(), 2u);
  EXPECT_EQ(s.sentence_boundaries[0], 2u);
  EXPECT_EQ(s.sentence_boundaries[1], 5u);
}

TEST(Tokenize, EmptyLinesAreSkipped) {
  Vocabulary v = build_vocabulary({"a"}, 1);
  TokenStream s = tokenize({"", "a", "   ", "a"}, v);
  EXPECT_EQ(s.size(), 4u);
  EXPECT_EQ(s.sentence_count(), 2u);
}

TEST(Tokenize, DetokenizeRoundTripReplacesUnknowns) {
  Vocabulary v = build_vocabulary({"a b c"}, 1);
  std::mt19937_64 gen(7);
  const std::vector<std::string> alphabet = {"a", "b", "c", "zulu", "yak"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> lines;
    const int n_lines = 1 + static_cast<int>(uniform_index(gen, 4));
    for (int l = 0; l < n_lines; ++l) {
      std::string line;
      const int n_words = 1 + static_cast<int>(uniform_index(gen, 6));
      for (int w = 0; w < n_words; ++w) {
        if (w) line += ' ';
        line += alphabet[uniform_index(gen, alphabet.size())];
      }
      lines.push_back(line);
    }
    std::vector<std::string> expected;
    for (const auto& line : lines) {
      std::string repl;
      for (const auto& tok : split_tokens(line)) {
        if (!repl.empty()) repl += ' ';
        repl += v.contains(tok) ? tok : kUnkToken;
      }
      expected.push_back(repl);
    }
    EXPECT_EQ(detokenize(tokenize(lines, v), v), expected);
  }
}

namespace {

TokenStream stream_of_sentences(int n_sentences, int words_per_sentence, const Vocabulary& v) {
  std::vector<std::string> lines;
  for (int s = 0; s < n_sentences; ++s) {
    std::string line;
    for (int w = 0; w < words_per_sentence; ++w) {
      if (w) line += ' ';
      line += "a";
    }
    lines.push_back(line);
  }
  return tokenize(lines, v);
}

}  // namespace

TEST(ChunkDocuments, EvenSplit) {
  Vocabulary v = build_vocabulary({"a"}, 1);
  DocumentChunks docs = chunk_documents(stream_of_sentences(10, 3, v), 5);
  EXPECT_EQ(docs.num_chunks(), 2u);
}

TEST(ChunkDocuments, LeftoverSentencesFormLastChunk) {
  Vocabulary v = build_vocabulary({"a"}, 1);
  DocumentChunks docs = chunk_documents(stream_of_sentences(11, 3, v), 5);
  ASSERT_EQ(docs.num_chunks(), 3u);
  int64_t last = 0;
  for (const auto& [id, count] : docs.chunks.back()) last += count;
  EXPECT_EQ(last, 4);  // one 3-word sentence plus its <eos>
}

TEST(ChunkDocuments, ConservesTokenCounts) {
  Vocabulary v = build_vocabulary({"a b c d e"}, 1);
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> lines;
    const int n = 1 + static_cast<int>(uniform_index(gen, 25));
    const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
    for (int s = 0; s < n; ++s) {
      std::string line;
      const int len = 1 + static_cast<int>(uniform_index(gen, 8));
      for (int w = 0; w < len; ++w) {
        if (w) line += ' ';
        line += words[uniform_index(gen, words.size())];
      }
      lines.push_back(line);
    }
    TokenStream s = tokenize(lines, v);
    const int chunk = 1 + static_cast<int>(uniform_index(gen, 7));
    DocumentChunks docs = chunk_documents(s, chunk);
    EXPECT_EQ(docs.total_tokens(), static_cast<int64_t>(s.size()));
    EXPECT_EQ(docs.num_chunks(),
              (s.sentence_count() + static_cast<size_t>(chunk) - 1) / static_cast<size_t>(chunk));
    // per-id conservation
    std::unordered_map<int32_t, int64_t> expect;
    for (int32_t id : s.tokens) ++expect[id];
    std::unordered_map<int32_t, int64_t> got;
    for (const auto& c : docs.chunks)
      for (const auto& [id, count] : c) got[id] += count;
    EXPECT_EQ(got, expect);
  }
}

TEST(ChunkDocuments, Errors) {
  Vocabulary v = build_vocabulary({"a"}, 1);
  TokenStream s = stream_of_sentences(2, 2, v);
  EXPECT_THROW(chunk_documents(s, 0), std::invalid_argument);
  TokenStream no_sentences;
  no_sentences.tokens = {2, 2};
  no_sentences.vocab_size = v.size();
  EXPECT_THROW(chunk_documents(no_sentences, 1), std::runtime_error);
}

TEST(BatchIterator, SeventyOneTokensGiveTwoBlocks) {
  TokenStream s;
  s.vocab_size = 100;
  for (int i = 0; i < 71; ++i) s.tokens.push_back(i % 100);
  BatchIterator it(s, 1, 35);
  EXPECT_EQ(it.num_blocks(), 2);
  Batch b0 = it.next();
  Batch b1 = it.next();
  EXPECT_FALSE(it.has_next());
  // targets shifted by one within the stream
  for (int t = 0; t < 35; ++t) {
    EXPECT_EQ(b0.in(0, t), s.tokens[static_cast<size_t>(t)]);
    EXPECT_EQ(b0.out(0, t), s.tokens[static_cast<size_t>(t) + 1]);
    EXPECT_EQ(b1.in(0, t), s.tokens[static_cast<size_t>(t) + 35]);
    EXPECT_EQ(b1.out(0, t), s.tokens[static_cast<size_t>(t) + 36]);
  }
}

TEST(BatchIterator, ContiguousLaneLayout) {
  TokenStream s;
  s.vocab_size = 10;
  for (int i = 0; i < 10; ++i) s.tokens.push_back(i);
  BatchIterator it(s, 2, 2);
  EXPECT_EQ(it.num_blocks(), 2);
  Batch b0 = it.next();
  // lane 0 covers tokens 0-4, lane 1 covers 5-9
  EXPECT_EQ(b0.in(0, 0), 0);
  EXPECT_EQ(b0.in(0, 1), 1);
  EXPECT_EQ(b0.in(1, 0), 5);
  EXPECT_EQ(b0.in(1, 1), 6);
  EXPECT_EQ(b0.out(0, 0), 1);
  EXPECT_EQ(b0.out(1, 1), 7);
  Batch b1 = it.next();
  EXPECT_EQ(b1.in(0, 0), 2);
  EXPECT_EQ(b1.in(1, 0), 7);
}

TEST(BatchIterator, BlocksPerLaneArithmetic) {
  TokenStream s;
  s.vocab_size = 2;
  s.tokens.assign(2'000'000, 1);
  BatchIterator it(s, 20, 35);
  EXPECT_EQ(it.num_blocks(), (100000 - 1) / 35);
  EXPECT_EQ(it.num_blocks(), 2857);
}

TEST(BatchIterator, TargetIsInputShiftedWithinLane) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    TokenStream s;
    s.vocab_size = 50;
    const size_t len = 30 + uniform_index(gen, 400);
    for (size_t i = 0; i < len; ++i) s.tokens.push_back(static_cast<int32_t>(uniform_index(gen, 50)));
    const int32_t batch = 1 + static_cast<int32_t>(uniform_index(gen, 4));
    const int32_t unroll = 1 + static_cast<int32_t>(uniform_index(gen, 7));
    if (s.size() < static_cast<size_t>(batch) * unroll + 1) continue;
    BatchIterator it(s, batch, unroll);
    std::vector<Batch> blocks;
    while (it.has_next()) blocks.push_back(it.next());
    for (size_t k = 0; k < blocks.size(); ++k) {
      for (int32_t b = 0; b < batch; ++b) {
        for (int32_t t = 0; t + 1 < unroll; ++t) {
          EXPECT_EQ(blocks[k].out(b, t), blocks[k].in(b, t + 1));
        }
        if (k + 1 < blocks.size()) {
          // lane continuity across blocks
          EXPECT_EQ(blocks[k].out(b, unroll - 1), blocks[k + 1].in(b, 0));
        }
      }
    }
  }
}

TEST(BatchIterator, StreamTooShortIsAnError) {
  TokenStream s;
  s.vocab_size = 5;
  s.tokens = {1, 2, 3};
  EXPECT_THROW(BatchIterator(s, 2, 2), std::runtime_error);
}
