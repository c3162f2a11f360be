#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "mthash/error.hpp"
#include "mthash/hash_code.hpp"
#include "mthash/retrieval.hpp"
#include "oracles.hpp"
#include "planted.hpp"

using namespace mthash;

namespace {

HashCode code(const std::string& bits) {
  HashCode c(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) c.set(j, bits[j] == '1');
  return c;
}

HashCode signs(std::vector<std::int8_t> s) { return HashCode::from_signs(s); }

}  // namespace

TEST_CASE("hamming examples") {
  CHECK(hamming(code("0110"), code("0110")) == 0);
  CHECK(hamming(signs({-1, 1, 1, -1}), signs({-1, -1, 1, 1})) == 2);
  std::mt19937_64 rng(1);
  auto a = oracle::random_code(16, rng);
  HashCode b(16);
  for (std::size_t j = 0; j < 16; ++j) b.set(j, !a.bit(j));
  CHECK(hamming(a, b) == 16);
  CHECK_THROWS_AS(hamming(HashCode(8), HashCode(16)), ShapeMismatch);
  CHECK(HashCode(64).words().size() == 1);
  CHECK(HashCode(65).words().size() == 2);
}

TEST_CASE("hamming is a metric") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t l = 1 + rng() % 130;
    auto a = oracle::random_code(l, rng), b = oracle::random_code(l, rng), c = oracle::random_code(l, rng);
    CHECK(hamming(a, a) == 0);
    CHECK(hamming(a, b) == hamming(b, a));
    CHECK(hamming(a, c) <= hamming(a, b) + hamming(b, c));
    CHECK(hamming(a, b) == oracle::hamming_by_bits(a, b));
  }
}

TEST_CASE("radius and top-K searches match a brute-force scan") {
  std::mt19937_64 rng(3);
  for (std::size_t l : {8u, 32u, 64u, 100u}) {
    std::vector<HashCode> codes;
    for (int i = 0; i < 500; ++i) codes.push_back(oracle::random_code(l, rng));
    codes.push_back(codes[7]);
    HammingIndex index(codes, l);
    for (int t = 0; t < 10; ++t) {
      auto q = oracle::random_code(l, rng);
      const int r = static_cast<int>(rng() % (l + 1));
      CHECK(index.search_radius(q, r) == oracle::brute_radius(codes, q, r));
      const std::size_t K = 1 + rng() % codes.size();
      CHECK(index.search_topk(q, K) == oracle::brute_topk(codes, q, K));
    }
  }
}

TEST_CASE("search boundaries") {
  std::mt19937_64 rng(4);
  std::vector<HashCode> codes;
  for (int i = 0; i < 50; ++i) codes.push_back(oracle::random_code(16, rng));
  HammingIndex index(codes, 16);
  const auto& q = codes[3];
  CHECK(index.search_radius(q, 16).size() == 50);
  for (const auto& h : index.search_radius(q, 0)) CHECK(codes[h.id] == q);
  CHECK(index.search_topk(q, 50).size() == 50);
  CHECK_THROWS_AS(index.search_topk(q, 51), InvalidArgument);
  CHECK(EvalParams{}.top_k == 200);
  CHECK(EvalParams{}.radius == 3);

  for (int r = 1; r <= 16; ++r) {
    auto inner = index.search_radius(q, r - 1);
    auto outer = index.search_radius(q, r);
    REQUIRE(outer.size() >= inner.size());
    CHECK(std::equal(inner.begin(), inner.end(), outer.begin()));
  }
}

TEST_CASE("identical codes and one class give perfect metrics") {
  std::vector<HashCode> codes(6, code("1010"));
  std::vector<TagSet> tags(6, TagSet({0}));
  HammingIndex index(codes, 4);
  auto row = evaluate(index, tags, codes, tags, {3, 4});
  CHECK(row.precision == 1.0);
  CHECK(row.recall == 1.0);
  CHECK(row.mp_topk == 1.0);
}

TEST_CASE("hand-built four document index") {
  std::vector<HashCode> train{code("0000"), code("0001"), code("0011"), code("1111")};
  std::vector<TagSet> train_tags{TagSet({0}), TagSet({0}), TagSet({1}), TagSet({1})};
  std::vector<HashCode> test{code("0000"), code("1111"), code("1100"), code("0000")};
  std::vector<TagSet> test_tags{TagSet({0}), TagSet({1}), TagSet({0}), TagSet{}};
  HammingIndex index(train, 4);

  auto row = evaluate(index, train_tags, test, test_tags, {1, 3});
  CHECK(row.queries == 3);
  CHECK(row.skipped_queries == 1);
  CHECK(row.empty_queries == 1);
  CHECK(row.precision == doctest::Approx(2.0 / 3.0));
  CHECK(row.mp_radius == doctest::Approx(2.0 / 3.0));
  CHECK(row.recall == doctest::Approx(0.5));
  CHECK(row.mp_topk == doctest::Approx(2.0 / 3.0));

  EvalParams pooled{1, 3, true};
  auto micro = evaluate(index, train_tags, test, test_tags, pooled);
  CHECK(micro.precision == doctest::Approx(1.0));
  CHECK(micro.recall == doctest::Approx(0.5));

  auto full = evaluate(index, train_tags, test, test_tags, {4, 3});
  CHECK(full.recall == 1.0);
}

TEST_CASE("metrics stay in the unit interval") {
  std::mt19937_64 rng(5);
  std::vector<HashCode> train, test;
  std::vector<TagSet> tt, qt;
  for (int i = 0; i < 200; ++i) {
    train.push_back(oracle::random_code(12, rng));
    tt.emplace_back(std::vector<TagId>{static_cast<TagId>(rng() % 4)});
  }
  for (int i = 0; i < 40; ++i) {
    test.push_back(oracle::random_code(12, rng));
    qt.emplace_back(std::vector<TagId>{static_cast<TagId>(rng() % 5)});
  }
  HammingIndex index(train, 12);
  for (int r : {0, 3, 6, 12}) {
    auto row = evaluate(index, tt, test, qt, {r, 50});
    for (double v : {row.precision, row.recall, row.mp_topk, row.mp_radius}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("csv report round trip") {
  EvalReport rep;
  rep.rows.push_back({4, 0.5, 0.25, 0.75, 0.5, 2, 0, 10});
  rep.rows.push_back({8, 0.125, 1.0, 0.0625, 0.125, 0, 0, 10});
  std::stringstream ss;
  rep.write_csv(ss);
  CHECK(ss.str().rfind("bits,precision,recall,mp_topk,mp_radius,empty_queries\n", 0) == 0);
  auto back = EvalReport::read_csv(ss);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].bits == 8);
  CHECK(back.rows[0].recall == 0.25);
  CHECK(back.rows[0].empty_queries == 2);
}

TEST_CASE("codes file round trip") {
  std::mt19937_64 rng(6);
  std::vector<HashCode> codes;
  for (int i = 0; i < 20; ++i) codes.push_back(oracle::random_code(70, rng));
  const auto path = std::filesystem::temp_directory_path() / "mthash_test_codes.bin";
  save_codes(path, codes);
  CHECK(std::filesystem::file_size(path) == 16 + 20 * 2 * 8);
  CHECK(load_codes(path) == codes);
  std::filesystem::remove(path);
}

TEST_CASE("lsh baseline") {
  auto s = fixture::planted(200, {4}, 8, 2, 4, 5);
  auto a = lsh_baseline(s.train, 64, 3);
  auto b = lsh_baseline(s.train, 64, 3);
  CHECK(a.model.planes.W == b.model.planes.W);
  CHECK(a.codes == b.codes);
  CHECK(a.codes[0].words().size() == 1);

  // Collision rate tracks keyword cosine.
  auto kw = keyword_vectors(s.train, KeywordWeighting::kTfidf);
  double similar = 0, dissimilar = 0;
  std::size_t ns = 0, nd = 0;
  for (std::size_t i = 0; i < s.train.n(); ++i) {
    for (std::size_t j = i + 1; j < s.train.n(); ++j) {
      const double c = cosine(kw[i], kw[j]);
      const double agree = 64 - hamming(a.codes[i], a.codes[j]);
      if (c > 0.3) {
        similar += agree;
        ++ns;
      } else if (c < 0.05) {
        dissimilar += agree;
        ++nd;
      }
    }
  }
  REQUIRE(ns > 0);
  REQUIRE(nd > 0);
  CHECK(similar / ns - dissimilar / nd > 0.0);
}
