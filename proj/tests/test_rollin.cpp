#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "levdec/rollin.hpp"

#include "test_support.hpp"

using namespace levdec;
using test_support::make_vocab;
using test_support::sent;

TEST_CASE("rollin_drop at the ratio extremes") {
  Vocab vocab = make_vocab({"a", "b", "c"});
  const Sentence ref = sent(vocab, "a b c");

  Rng rng0(1);
  const auto [keep_all, none_mask] = rollin_drop_with_ratio(ref, 0.0, rng0);
  REQUIRE(keep_all == ref);
  REQUIRE(none_mask == DropMask{0, 0, 0});

  Rng rng1(1);
  const auto [keep_none, all_mask] = rollin_drop_with_ratio(ref, 1.0, rng1);
  REQUIRE(keep_none.empty());
  REQUIRE(all_mask == DropMask{1, 1, 1});
}

TEST_CASE("rollin_drop is reproducible under a fixed seed") {
  Vocab vocab = make_vocab({"a", "b", "c", "d", "e"});
  const Sentence ref = sent(vocab, "a b c d e a b c d e");
  Rng rng_a(2024);
  Rng rng_b(2024);
  const auto [sent_a, mask_a] = rollin_drop(ref, rng_a);
  const auto [sent_b, mask_b] = rollin_drop(ref, rng_b);
  REQUIRE(mask_a == mask_b);
  REQUIRE(sent_a == sent_b);
}

TEST_CASE("rollin_mask replaces dropped positions by <pld>") {
  Vocab vocab = make_vocab({"a", "b", "c"});
  const Sentence ref = sent(vocab, "a b c");
  REQUIRE(rollin_mask(ref, DropMask{0, 0, 0}) == ref);

  const Sentence masked = rollin_mask(ref, DropMask{0, 1, 0});
  REQUIRE(masked.ids == std::vector<TokenId>{vocab.id_of("a"), kPld, vocab.id_of("c")});

  REQUIRE_THROWS_AS(rollin_mask(ref, DropMask{0, 1}), ContractError);
}

TEST_CASE("rollin_mask agrees with rollin_drop masks") {
  Vocab vocab = make_vocab({"a", "b", "c", "d"});
  const Sentence ref = sent(vocab, "a b c d a b c d");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto [survivors, mask] = rollin_drop(ref, rng);
    const Sentence masked = rollin_mask(ref, mask);
    REQUIRE(masked.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      REQUIRE((masked.ids[i] == kPld) == (mask[i] != 0));
      if (!mask[i]) REQUIRE(masked.ids[i] == ref.ids[i]);
    }
  }
}

TEST_CASE("rollin_model_sample picks the only or dominant candidate") {
  Rng rng(5);
  REQUIRE(rollin_model_sample({{0.0}}, rng) == std::vector<TokenId>{0});
  for (int i = 0; i < 100; ++i) {
    REQUIRE(rollin_model_sample({{1e9, -1e9}}, rng) == std::vector<TokenId>{0});
  }
}

TEST_CASE("rollin_model_sample is near-uniform on tied scores") {
  Rng rng(31);
  int first = 0;
  for (int i = 0; i < 10000; ++i) {
    first += rollin_model_sample({{0.0, 0.0}}, rng)[0] == 0;
  }
  // Binomial(10000, .5): 6 sigma = 300.
  REQUIRE(first >= 4700);
  REQUIRE(first <= 5300);
}

TEST_CASE("rollin_model_sample rejects bad inputs") {
  Rng rng(1);
  REQUIRE_THROWS_AS(rollin_model_sample({{}}, rng), ContractError);
  REQUIRE_THROWS_AS(
      rollin_model_sample({{0.0, std::numeric_limits<double>::quiet_NaN()}}, rng),
      ContractError);
  REQUIRE_THROWS_AS(
      rollin_model_sample({{std::numeric_limits<double>::infinity()}}, rng), ContractError);
}
