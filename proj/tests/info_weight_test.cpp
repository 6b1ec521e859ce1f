#include "cachelm/info_weight.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cachelm/rng.hpp"

using namespace cachelm;

namespace {

Vocabulary small_vocab() {
  return Vocabulary::from_words({"<unk>", "<eos>", "w0", "w1", "w2", "w3"});
}

// counts[j][i] = count of word id i in chunk j
DocumentChunks chunks_from_counts(const std::vector<std::vector<int64_t>>& counts) {
  DocumentChunks docs;
  docs.chunk_size_sentences = 1;
  for (const auto& row : counts) {
    docs.chunks.emplace_back();
    for (size_t id = 0; id < row.size(); ++id) {
      if (row[id] > 0) docs.chunks.back()[static_cast<int32_t>(id)] = row[id];
    }
    docs.vocab_size = static_cast<int32_t>(row.size());
  }
  return docs;
}

}  // namespace

TEST(InfoWeights, SingleChunkWordHasWeightOne) {
  Vocabulary v = small_vocab();
  // w0 (id 2) appears only in chunk 3, with count 7
  DocumentChunks docs = chunks_from_counts({
      {0, 1, 0, 1, 0, 0},
      {0, 1, 0, 1, 0, 0},
      {0, 1, 0, 1, 0, 0},
      {0, 1, 7, 1, 0, 0},
  });
  InfoWeights iw = compute_info_weights(docs, v);
  EXPECT_DOUBLE_EQ(iw.of(2), 1.0);
}

TEST(InfoWeights, UniformWordHasWeightZero) {
  Vocabulary v = small_vocab();
  DocumentChunks docs = chunks_from_counts({
      {0, 1, 1, 0, 0, 0},
      {0, 1, 1, 0, 0, 0},
      {0, 1, 1, 0, 0, 0},
      {0, 1, 1, 0, 0, 0},
      {0, 1, 1, 0, 0, 0},
  });
  InfoWeights iw = compute_info_weights(docs, v);
  EXPECT_NEAR(iw.of(2), 0.0, 1e-12);
  EXPECT_NEAR(iw.of(1), 0.0, 1e-12);  // <eos> uniform as well
}

TEST(InfoWeights, TwoEqualChunksClosedForm) {
  Vocabulary v = small_vocab();
  for (int n = 2; n <= 12; ++n) {
    std::vector<std::vector<int64_t>> counts(static_cast<size_t>(n),
                                             std::vector<int64_t>(6, 0));
    for (auto& row : counts) row[1] = 1;  // keep every chunk non-empty
    counts[0][2] = 5;
    counts[static_cast<size_t>(n - 1)][2] = 5;
    InfoWeights iw = compute_info_weights(chunks_from_counts(counts), v);
    if (n == 2) {
      EXPECT_NEAR(iw.of(2), 0.0, 1e-12);  // 1 - log2/log2
    } else {
      EXPECT_NEAR(iw.of(2), 1.0 - std::log(2.0) / std::log(static_cast<double>(n)), 1e-12);
    }
  }
}

TEST(InfoWeights, UnseenVocabularyWordGetsZero) {
  Vocabulary v = small_vocab();
  DocumentChunks docs = chunks_from_counts({
      {0, 1, 1, 0, 0, 0},
      {0, 1, 0, 0, 0, 0},
  });
  InfoWeights iw = compute_info_weights(docs, v);
  EXPECT_EQ(iw.of(4), 0.0);  // w2 never occurs
  EXPECT_EQ(iw.of(0), 0.0);  // <unk> never occurs
}

TEST(InfoWeights, FewerThanTwoChunksIsAnError) {
  Vocabulary v = small_vocab();
  DocumentChunks docs = chunks_from_counts({{0, 1, 1, 0, 0, 0}});
  EXPECT_THROW(compute_info_weights(docs, v), std::runtime_error);
}

TEST(InfoWeights, WeightsAreClampedToUnitInterval) {
  Vocabulary v = small_vocab();
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(gen, 10));
    std::vector<std::vector<int64_t>> counts(static_cast<size_t>(n),
                                             std::vector<int64_t>(6, 0));
    for (auto& row : counts) {
      for (size_t id = 1; id < 6; ++id) row[id] = static_cast<int64_t>(uniform_index(gen, 9));
      row[1] += 1;
    }
    InfoWeights iw = compute_info_weights(chunks_from_counts(counts), v);
    for (double lam : iw.lambda) {
      EXPECT_GE(lam, 0.0);
      EXPECT_LE(lam, 1.0);
    }
  }
}

TEST(InfoWeights, ScaleInvariance) {
  Vocabulary v = small_vocab();
  std::vector<std::vector<int64_t>> counts = {
      {0, 1, 3, 2, 0, 0},
      {0, 1, 1, 0, 4, 0},
      {0, 1, 0, 2, 4, 0},
  };
  InfoWeights base = compute_info_weights(chunks_from_counts(counts), v);
  for (int64_t k : {2, 7, 100}) {
    auto scaled = counts;
    for (auto& row : scaled) row[2] *= k;  // scale word id 2 everywhere
    InfoWeights iw = compute_info_weights(chunks_from_counts(scaled), v);
    EXPECT_NEAR(iw.of(2), base.of(2), 1e-12);
  }
}

TEST(InfoWeights, PermutationInvariance) {
  Vocabulary v = small_vocab();
  std::vector<std::vector<int64_t>> counts = {
      {0, 1, 3, 2, 0, 9},
      {0, 1, 1, 0, 4, 0},
      {0, 1, 0, 2, 4, 0},
      {0, 2, 0, 1, 1, 0},
  };
  InfoWeights base = compute_info_weights(chunks_from_counts(counts), v);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = counts;
    for (size_t k = shuffled.size(); k > 1; --k) {
      std::swap(shuffled[k - 1], shuffled[uniform_index(gen, k)]);
    }
    InfoWeights iw = compute_info_weights(chunks_from_counts(shuffled), v);
    for (int32_t id = 0; id < v.size(); ++id) EXPECT_DOUBLE_EQ(iw.of(id), base.of(id));
  }
  EXPECT_DOUBLE_EQ(base.of(5), 1.0);  // single-chunk word stays 1 under relabeling
}

TEST(InfoWeights, ConcentrationMaximizesWeight) {
  Vocabulary v = small_vocab();
  std::vector<std::vector<int64_t>> spread = {
      {0, 1, 3, 0, 0, 0},
      {0, 1, 2, 0, 0, 0},
      {0, 1, 4, 0, 0, 0},
  };
  InfoWeights before = compute_info_weights(chunks_from_counts(spread), v);
  std::vector<std::vector<int64_t>> concentrated = {
      {0, 1, 9, 0, 0, 0},
      {0, 1, 0, 0, 0, 0},
      {0, 1, 0, 0, 0, 0},
  };
  InfoWeights after = compute_info_weights(chunks_from_counts(concentrated), v);
  EXPECT_DOUBLE_EQ(after.of(2), 1.0);
  EXPECT_LT(before.of(2), after.of(2));
}

TEST(InfoWeights, SaveLoadRoundTripIsBitExact) {
  Vocabulary v = small_vocab();
  std::mt19937_64 gen(23);
  InfoWeights iw;
  iw.num_documents = 12;
  iw.source_chunk_size = 100;
  for (int32_t id = 0; id < v.size(); ++id) iw.lambda.push_back(uniform_unit(gen));
  const std::string path = testing::TempDir() + "/iw.tsv";
  save_info_weights(iw, v, path);
  InfoWeights loaded = load_info_weights(path, v);
  EXPECT_EQ(loaded.num_documents, 12);
  EXPECT_EQ(loaded.source_chunk_size, 100);
  for (int32_t id = 0; id < v.size(); ++id) {
    EXPECT_EQ(loaded.of(id), iw.of(id)) << "word id " << id;  // bit-identical
  }
}

TEST(InfoWeights, MalformedFileNamesTheLine) {
  Vocabulary v = small_vocab();
  const std::string path = testing::TempDir() + "/bad_iw.tsv";
  {
    std::ofstream out(path);
    out << "#chunk_size=1\t#num_docs=2\n";
    out << "w0\t0.5\n";
    out << "w1\tnot_a_number\n";
  }
  try {
    load_info_weights(path, v);
    FAIL() << "expected parse error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(InfoWeights, MissingWordIsAnError) {
  Vocabulary v = small_vocab();
  const std::string path = testing::TempDir() + "/partial_iw.tsv";
  {
    std::ofstream out(path);
    out << "#chunk_size=1\t#num_docs=2\n";
    out << "w0\t0.5\n";
  }
  EXPECT_THROW(load_info_weights(path, v), std::runtime_error);
}
