#include <gtest/gtest.h>

#include <random>

#include "emachine/codes.hpp"
#include "emachine/error.hpp"

using namespace emachine;
using codes::SimilarityKind;
using codes::SymbolVector;

namespace {

SymbolVector random_vector(std::mt19937_64& rng, std::size_t dim, int max_symbol) {
  std::uniform_int_distribution<int> d(0, max_symbol);
  std::vector<int> c(dim);
  for (auto& v : c) v = d(rng);
  return SymbolVector(c);
}

}  // namespace

TEST(Similarity, ScalarProduct) {
  EXPECT_DOUBLE_EQ(codes::similarity({1, 2, 0}, {3, 1, 5}, SimilarityKind::ScalarProduct), 5.0);
  EXPECT_DOUBLE_EQ(codes::similarity({0, 0}, {1, 1}, SimilarityKind::ScalarProduct), 0.0);
}

TEST(Similarity, RatioCountsMatchingNonzeroPositions) {
  // 2 of x's 3 nonzero positions match exactly.
  EXPECT_DOUBLE_EQ(codes::similarity({1, 2, 3, 0}, {1, 2, 1, 4}, SimilarityKind::NonzeroMatchRatio), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(codes::similarity({0, 0}, {1, 1}, SimilarityKind::NonzeroMatchRatio), 0.0);
}

TEST(Similarity, RatioIsAsymmetric) {
  const SymbolVector x{1, 0}, g{1, 5};
  EXPECT_DOUBLE_EQ(codes::similarity(x, g, SimilarityKind::NonzeroMatchRatio), 1.0);
  EXPECT_DOUBLE_EQ(codes::similarity(g, x, SimilarityKind::NonzeroMatchRatio), 0.5);
}

TEST(Similarity, DimensionMismatchIsConfigError) {
  try {
    codes::similarity({1, 0}, {1, 0, 0}, SimilarityKind::ScalarProduct);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Config);
  }
}

TEST(SimilarityProperty, ScalarProductSymmetricRatioSelfIsOne) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_vector(rng, 6, 3), b = random_vector(rng, 6, 3);
    EXPECT_EQ(codes::similarity(a, b, SimilarityKind::ScalarProduct),
              codes::similarity(b, a, SimilarityKind::ScalarProduct));
    if (!a.is_null()) EXPECT_EQ(codes::similarity(a, a, SimilarityKind::NonzeroMatchRatio), 1.0);
  }
}

TEST(DecodingCheck, Examples) {
  EXPECT_TRUE(codes::correct_decoding_check(std::vector<SymbolVector>{}, SimilarityKind::ScalarProduct).pass);
  EXPECT_TRUE(
      codes::correct_decoding_check(std::vector<SymbolVector>{{1, 0}, {0, 1}}, SimilarityKind::ScalarProduct).pass);

  const auto v = codes::correct_decoding_check(std::vector<SymbolVector>{{1, 0}, {1, 1}}, SimilarityKind::ScalarProduct);
  ASSERT_FALSE(v.pass);
  ASSERT_TRUE(v.witness);
  EXPECT_EQ(v.witness->first, (SymbolVector{1, 0}));
  EXPECT_EQ(v.witness->second, (SymbolVector{1, 1}));

  EXPECT_FALSE(
      codes::correct_decoding_check(std::vector<SymbolVector>{{1, 0}, {1, 5}}, SimilarityKind::NonzeroMatchRatio).pass);
}

TEST(DecodingProperty, PassImpliesUniqueArgmax) {
  std::mt19937_64 rng(3);
  int passed = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SymbolVector> set;
    for (int k = 0; k < 4; ++k) set.push_back(random_vector(rng, 5, 2));
    for (auto kind : {SimilarityKind::ScalarProduct, SimilarityKind::NonzeroMatchRatio}) {
      if (!codes::correct_decoding_check(set, kind).pass) continue;
      ++passed;
      for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = 0; j < set.size(); ++j) {
          if (set[i] != set[j]) EXPECT_LT(codes::similarity(set[i], set[j], kind), codes::similarity(set[i], set[i], kind));
        }
      }
    }
  }
  EXPECT_GT(passed, 10);
}

TEST(Codebook, OneHotRoundTrip) {
  const auto book = codes::Codebook::one_hot({"a", "b", "c"});
  EXPECT_EQ(book.dimension(), 3u);
  EXPECT_EQ(book.encode("b"), (SymbolVector{0, 1, 0}));
  EXPECT_EQ(book.decode(SymbolVector{0, 0, 1}), "c");
  EXPECT_FALSE(book.decode(SymbolVector{1, 1, 0}));
}

TEST(SymbolVectorJson, RoundTrip) {
  const SymbolVector v{0, 3, 1};
  const nlohmann::json j = v;
  EXPECT_EQ(j.dump(), "[0,3,1]");
  EXPECT_EQ(j.get<SymbolVector>(), v);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 7), derive_seed(5, 7));
}
