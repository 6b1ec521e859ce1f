#include "cachelm/wer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cachelm/rng.hpp"

using namespace cachelm;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> w) {
  return std::vector<std::string>(w.begin(), w.end());
}

// Plain exhaustive recursion over all edit scripts; no DP table.
int brute_force_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                         size_t i, size_t j) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  int best = brute_force_distance(ref, hyp, i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
  best = std::min(best, brute_force_distance(ref, hyp, i, j + 1) + 1);
  best = std::min(best, brute_force_distance(ref, hyp, i + 1, j) + 1);
  return best;
}

std::vector<UttErrors> errors_of(const std::vector<std::pair<int, int>>& err_and_len) {
  std::vector<UttErrors> out;
  int k = 0;
  for (const auto& [err, len] : err_and_len) {
    UttErrors e;
    e.utterance_id = "utt" + std::to_string(k++);
    e.substitutions = err;
    e.ref_len = len;
    out.push_back(e);
  }
  return out;
}

}  // namespace

TEST(AlignWer, IdenticalSequencesHaveNoErrors) {
  UttErrors e = align_wer(words({"a", "b", "c"}), words({"a", "b", "c"}));
  EXPECT_EQ(e.total(), 0);
  EXPECT_EQ(e.ref_len, 3);
}

TEST(AlignWer, SingleSubstitution) {
  UttErrors e = align_wer(words({"a", "b", "c"}), words({"a", "x", "c"}));
  EXPECT_EQ(e.substitutions, 1);
  EXPECT_EQ(e.insertions, 0);
  EXPECT_EQ(e.deletions, 0);
  EXPECT_NEAR(corpus_wer({e}), 100.0 / 3.0, 1e-12);
}

TEST(AlignWer, PureInsertions) {
  UttErrors e = align_wer(words({"a", "b"}), words({"a", "x", "b", "y"}));
  EXPECT_EQ(e.substitutions, 0);
  EXPECT_EQ(e.insertions, 2);
  EXPECT_EQ(e.deletions, 0);
}

TEST(AlignWer, EmptySequences) {
  EXPECT_EQ(align_wer({}, {}).total(), 0);
  EXPECT_EQ(align_wer(words({"a", "b"}), {}).deletions, 2);
  EXPECT_EQ(align_wer({}, words({"a"})).insertions, 1);
}

TEST(AlignWer, TotalIsSymmetricAndBounded) {
  std::mt19937_64 gen(7);
  const std::vector<std::string> alpha = {"a", "b", "c"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> x, y;
    const size_t nx = uniform_index(gen, 7);
    const size_t ny = uniform_index(gen, 7);
    for (size_t k = 0; k < nx; ++k) x.push_back(alpha[uniform_index(gen, 3)]);
    for (size_t k = 0; k < ny; ++k) y.push_back(alpha[uniform_index(gen, 3)]);
    const int d_xy = align_wer(x, y).total();
    const int d_yx = align_wer(y, x).total();
    EXPECT_EQ(d_xy, d_yx);
    EXPECT_LE(d_xy, static_cast<int>(std::max(x.size(), y.size())));
    EXPECT_EQ(align_wer(x, x).total(), 0);
  }
}

TEST(AlignWer, MatchesExhaustiveSearchOnSampledPairs) {
  // the full <=6-length sweep runs in the acceptance suite
  std::mt19937_64 gen(11);
  const std::vector<std::string> alpha = {"a", "b", "c"};
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<std::string> x, y;
    const size_t nx = uniform_index(gen, 6);
    const size_t ny = uniform_index(gen, 6);
    for (size_t k = 0; k < nx; ++k) x.push_back(alpha[uniform_index(gen, 3)]);
    for (size_t k = 0; k < ny; ++k) y.push_back(alpha[uniform_index(gen, 3)]);
    EXPECT_EQ(align_wer(x, y).total(), brute_force_distance(x, y, 0, 0));
  }
}

TEST(CorpusWer, AllCorrectIsZero) {
  EXPECT_DOUBLE_EQ(corpus_wer(errors_of({{0, 10}, {0, 5}})), 0.0);
}

TEST(CorpusWer, SimpleArithmetic) {
  EXPECT_DOUBLE_EQ(corpus_wer(errors_of({{1, 40}})), 2.5);
  EXPECT_DOUBLE_EQ(corpus_wer(errors_of({{1, 10}, {3, 30}})), 10.0);
}

TEST(CorpusWer, Errors) {
  EXPECT_THROW(corpus_wer({}), std::runtime_error);
  EXPECT_THROW(corpus_wer(errors_of({{0, 0}})), std::runtime_error);
}

TEST(BootstrapPoi, IdenticalSystemsGiveExactlyFifty) {
  auto a = errors_of({{1, 10}, {3, 12}, {0, 9}});
  BootstrapResult r = bootstrap_poi(a, a, 2000, 42);
  EXPECT_EQ(r.poi, 50.0);
}

TEST(BootstrapPoi, StrictlyBetterSystemGivesHundred) {
  auto a = errors_of({{2, 10}, {3, 12}, {1, 9}});
  auto b = errors_of({{1, 10}, {2, 12}, {0, 9}});
  BootstrapResult r = bootstrap_poi(a, b, 2000, 42);
  EXPECT_EQ(r.poi, 100.0);
}

TEST(BootstrapPoi, Antisymmetry) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(uniform_index(gen, 8));
    std::vector<std::pair<int, int>> ea, eb;
    for (int k = 0; k < n; ++k) {
      ea.emplace_back(static_cast<int>(uniform_index(gen, 5)), 10);
      eb.emplace_back(static_cast<int>(uniform_index(gen, 5)), 10);
    }
    auto a = errors_of(ea);
    auto b = errors_of(eb);
    const uint64_t seed = gen();
    BootstrapResult ab = bootstrap_poi(a, b, 500, seed);
    BootstrapResult ba = bootstrap_poi(b, a, 500, seed);
    EXPECT_DOUBLE_EQ(ab.poi + ba.poi, 100.0);
  }
}

TEST(BootstrapPoi, MatchesExhaustiveEnumerationOnTinyInstances) {
  // A errors (1,0), B errors (0,1): the four equiprobable replicates are
  // (0,0) B wins, (0,1)/(1,0) ties, (1,1) A wins -> poi exactly 50.
  auto a = errors_of({{1, 10}, {0, 10}});
  auto b = errors_of({{0, 10}, {1, 10}});
  const int64_t samples = 10000;
  BootstrapResult r = bootstrap_poi(a, b, samples, 7);
  // per-replicate win variable: values {1, .5, .5, 0} -> var 0.125
  const double se = 100.0 * std::sqrt(0.125 / static_cast<double>(samples));
  EXPECT_NEAR(r.poi, 50.0, 3.0 * se);

  // a second instance, n = 3, enumerated exactly
  auto a3 = errors_of({{2, 10}, {0, 10}, {1, 10}});
  auto b3 = errors_of({{0, 10}, {1, 10}, {2, 10}});
  double p_win = 0.0, p_tie = 0.0;
  const int n = 3;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const int ta = a3[i].total() + a3[j].total() + a3[k].total();
        const int tb = b3[i].total() + b3[j].total() + b3[k].total();
        if (tb < ta) p_win += 1.0;
        if (tb == ta) p_tie += 1.0;
      }
  p_win /= 27.0;
  p_tie /= 27.0;
  const double exact = 100.0 * (p_win + 0.5 * p_tie);
  const double mean = p_win + 0.5 * p_tie;
  const double var = p_win + 0.25 * p_tie - mean * mean;
  const double se3 = 100.0 * std::sqrt(var / static_cast<double>(samples));
  BootstrapResult r3 = bootstrap_poi(a3, b3, samples, 19);
  EXPECT_NEAR(r3.poi, exact, 3.0 * se3 + 1e-9);
}

TEST(BootstrapPoi, SeedMakesResultsReproducible) {
  auto a = errors_of({{1, 10}, {0, 10}, {2, 10}});
  auto b = errors_of({{0, 10}, {1, 10}, {1, 10}});
  EXPECT_EQ(bootstrap_poi(a, b, 300, 5).poi, bootstrap_poi(a, b, 300, 5).poi);
  EXPECT_NE(bootstrap_poi(a, b, 300, 5).poi, bootstrap_poi(a, b, 300, 6).poi);
}

TEST(BootstrapPoi, MismatchedUtteranceSetsAreAnError) {
  auto a = errors_of({{1, 10}, {0, 10}});
  auto b = errors_of({{1, 10}});
  EXPECT_THROW(bootstrap_poi(a, b, 100, 0), std::runtime_error);
  b = errors_of({{1, 10}, {0, 10}});
  b[1].utterance_id = "other";
  EXPECT_THROW(bootstrap_poi(a, b, 100, 0), std::runtime_error);
  EXPECT_THROW(bootstrap_poi(a, a, 0, 0), std::invalid_argument);
}
