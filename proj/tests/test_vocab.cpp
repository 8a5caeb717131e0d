#include "decsal/vocab.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "decsal/errors.hpp"
#include "doctest.h"

using namespace decsal;

TEST_CASE("build_vocab orders by frequency after the specials") {
  std::istringstream corpus("a a b");
  Vocabulary v = build_vocab(corpus, 10, 1);
  CHECK(v.size() == 7);
  CHECK(v.token(5) == "a");
  CHECK(v.token(6) == "b");
  CHECK(v.token(kPadId) == "[PAD]");
  CHECK(v.token(kUnkId) == "[UNK]");
}

TEST_CASE("build_vocab honors min_freq") {
  std::istringstream corpus("a a b");
  Vocabulary v = build_vocab(corpus, 10, 2);
  CHECK(v.size() == 6);
  CHECK(v.token(5) == "a");
  CHECK(v.id_of("b") == kUnkId);
}

TEST_CASE("build_vocab rejects an empty corpus") {
  std::istringstream corpus("");
  CHECK_THROWS_AS(build_vocab(corpus, 10, 1), DataError);
}

TEST_CASE("build_vocab matches a sort-then-truncate oracle on a synthetic corpus") {
  std::mt19937_64 rng(42);
  std::vector<std::string> pool;
  for (int i = 0; i < 60; ++i) pool.push_back("word" + std::to_string(i));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::ostringstream corpus;
  std::map<std::string, std::size_t> freq;
  for (int i = 0; i < 1000; ++i) {
    const std::string& w = pool[pick(rng)];
    ++freq[w];
    corpus << w << (i % 20 == 19 ? "\n" : " ");
  }
  const std::size_t max_size = 40;
  std::istringstream in(corpus.str());
  Vocabulary v = build_vocab(in, max_size, 1);

  // Oracle: sort (count desc, token asc), truncate to max_size - specials.
  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(), freq.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  CHECK(v.size() == max_size);
  for (std::size_t i = 0; i < max_size - kNumSpecials; ++i) {
    CHECK(v.token(static_cast<TokenId>(kNumSpecials + i)) == entries[i].first);
  }
}

TEST_CASE("encode produces CLS body SEP with padding") {
  Vocabulary v({"big", "dog"});
  TokenSeq seq = encode(v, "big dog", 4);
  CHECK(seq.ids == std::vector<TokenId>{kClsId, v.id_of("big"), v.id_of("dog"), kSepId});
  CHECK(seq.mask == std::vector<std::uint8_t>{1, 1, 1, 1});
}

TEST_CASE("encode of empty text") {
  Vocabulary v({"big", "dog"});
  TokenSeq seq = encode(v, "", 4);
  CHECK(seq.ids == std::vector<TokenId>{kClsId, kSepId, kPadId, kPadId});
  CHECK(seq.mask == std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(seq.unique_content_ids().empty());
}

TEST_CASE("encode maps out-of-vocabulary words to UNK") {
  Vocabulary v({"big", "dog"});
  TokenSeq seq = encode(v, "big zebra", 5);
  CHECK(seq.ids[1] == v.id_of("big"));
  CHECK(seq.ids[2] == kUnkId);
}

TEST_CASE("encode lowercases and splits on punctuation") {
  Vocabulary v({"big", "dog"});
  TokenSeq seq = encode(v, "Big, DOG!", 6);
  CHECK(seq.ids[1] == v.id_of("big"));
  CHECK(seq.ids[2] == v.id_of("dog"));
  CHECK(seq.ids[3] == kSepId);
}

TEST_CASE("encode truncation keeps the first n_max-2 content tokens") {
  Vocabulary v({"a", "b", "c", "d"});
  TokenSeq seq = encode(v, "a b c d", 4);
  CHECK(seq.ids == std::vector<TokenId>{kClsId, v.id_of("a"), v.id_of("b"), kSepId});
}

TEST_CASE("decode renders specials as bracketed names and round-trips content") {
  Vocabulary v({"big", "dog"});
  TokenSeq seq = encode(v, "big dog", 5);
  CHECK(decode_ids(v, seq.ids) == "[CLS] big dog [SEP] [PAD]");
  TokenSeq again = encode(v, "big dog", 5);
  CHECK(again.ids == seq.ids);
}

TEST_CASE("decode rejects out-of-range ids") {
  Vocabulary v({"big"});
  CHECK_THROWS_AS(decode_ids(v, {static_cast<TokenId>(v.size())}), DataError);
}

TEST_CASE("unique_content_ids excludes specials and dedupes in first-appearance order") {
  Vocabulary v({"a", "b"});
  TokenSeq seq = encode(v, "b a b", 8);
  auto unique = seq.unique_content_ids();
  REQUIRE(unique.size() == 2);
  CHECK(unique[0] == v.id_of("b"));
  CHECK(unique[1] == v.id_of("a"));
  for (TokenId id : unique) CHECK_FALSE(Vocabulary::is_special(id));
}

TEST_CASE("vocabulary JSON round-trip preserves ids") {
  Vocabulary v({"big", "dog", "cat"});
  Vocabulary back = Vocabulary::from_json(v.to_json());
  CHECK(back.size() == v.size());
  for (TokenId id = 0; id < static_cast<TokenId>(v.size()); ++id)
    CHECK(back.token(id) == v.token(id));
}
