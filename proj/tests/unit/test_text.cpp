#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <stdexcept>

#include "curio/hashing.hpp"
#include "curio/parallel.hpp"
#include "curio/text.hpp"

using namespace curio;

TEST(Text, NormalizeWhitespace) {
  EXPECT_EQ(text::normalize_whitespace("  a \n\t b  c "), "a b c");
  EXPECT_EQ(text::normalize_whitespace(""), "");
}

TEST(Text, NormalizeAnswerDropsCaseAndPunctuation) {
  EXPECT_EQ(text::normalize_answer("The Butler, obviously!"), "the butler obviously");
}

TEST(Text, SplitSentencesKeepsTerminators) {
  const auto s = text::split_sentences("Hi there. How are you? Great!");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0], "Hi there.");
  EXPECT_EQ(s[1], "How are you?");
  EXPECT_EQ(s[2], "Great!");
}

TEST(Text, QuotedTerminatorDoesNotSplit) {
  const auto s = text::split_sentences("He said \"why? now\" and left. Ok?");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(text::count_questions("He said \"why? now\" and left. Ok?"), 1);
}

TEST(Text, Words) {
  const auto w = text::words("You're GOOD, aren't you?");
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0], "you're");
  EXPECT_EQ(w[2], "aren't");
}

TEST(Hashing, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hashing, DeriveSeedDependsOnEveryPart) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, {a, b}));
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(7, {1, 2}), derive_seed(7, {1, 2}));
  EXPECT_NE(derive_seed(7, {1, 2}), derive_seed(8, {1, 2}));
}

TEST(Hashing, RngIndexStaysInRange) {
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(rng.index(7), 7u);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Parallel, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(500);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsAfterAllWorkersFinish) {
  std::atomic<int> done{0};
  EXPECT_THROW(parallel_for(100, 4,
                            [&](std::size_t i) {
                              if (i == 3) throw std::runtime_error("boom");
                              done++;
                            }),
               std::runtime_error);
  EXPECT_GE(done.load(), 1);
}
