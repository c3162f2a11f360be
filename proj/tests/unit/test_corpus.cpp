#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "mthash/corpus.hpp"
#include "mthash/error.hpp"

using namespace mthash;

TEST_CASE("jsonl corpus with two records") {
  auto c = fixture::jsonl("{\"text\":\"a b\",\"tags\":[\"x\"]}\n{\"text\":\"b c\",\"tags\":[]}\n");
  CHECK(c.n() == 2);
  CHECK(c.d() == 3);
  CHECK(c.q() == 1);
  CHECK(c.tags[0] == TagSet({0}));
  CHECK(c.tags[1].empty());
  CHECK(c.has_tags());
}

TEST_CASE("duplicate tokens aggregate into counts") {
  auto c = fixture::jsonl("{\"text\":\"a a b\"}\n");
  const auto a = *c.vocab.find("a");
  bool found = false;
  for (const auto& e : c.docs[0].entries()) {
    if (e.term == a) {
      CHECK(e.weight == 2.0);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("tsv corpus with eight domain labels") {
  const char* labels[] = {"business", "computers", "culture-arts", "education",
                          "engineering", "health", "politics", "sports"};
  std::ostringstream text;
  for (int r = 0; r < 3; ++r)
    for (const char* l : labels) text << l << "\tsome words about " << l << " " << r << "\n";
  std::istringstream in(text.str());
  auto c = read_corpus(in, CorpusFormat::kTsv);
  CHECK(c.n() == 24);
  CHECK(c.q() == 8);
}

TEST_CASE("malformed record reports its line") {
  std::istringstream in("{\"text\":\"a\"}\nnot json\n");
  try {
    read_corpus(in, CorpusFormat::kJsonl);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream empty("");
  CHECK_THROWS_AS(read_corpus(empty, CorpusFormat::kJsonl), EmptyCorpusError);
}

TEST_CASE("idf of a term in every document clamps to zero") {
  auto c = fixture::jsonl("{\"text\":\"a b\"}\n{\"text\":\"a c\"}\n");
  auto m = TfidfModel::fit(c);
  CHECK(std::log(2.0 / 3.0) < 0.0);
  CHECK(m.idf(*c.vocab.find("a")) == 0.0);
}

TEST_CASE("idf of a term in one of ten documents") {
  std::string text = "{\"text\":\"rare\"}\n";
  for (int i = 0; i < 9; ++i) text += "{\"text\":\"common\"}\n";
  auto c = fixture::jsonl(text);
  auto m = TfidfModel::fit(c);
  CHECK(m.idf(*c.vocab.find("rare")) == doctest::Approx(std::log(10.0 / 2.0)).epsilon(1e-12));
  CHECK(m.idf(*c.vocab.find("rare")) == doctest::Approx(1.6094).epsilon(1e-4));
}

TEST_CASE("empty document has no entries") {
  auto c = fixture::jsonl("{\"text\":\"\"}\n{\"text\":\"a\"}\n");
  auto t = tfidf_transform(c);
  CHECK(t.docs[0].empty());
  CHECK(t.docs[0].norm() == 0.0);
}

TEST_CASE("cosine examples") {
  auto a = SparseDocVector::from_entries({{0, 1.0}, {1, 1.0}});
  auto b = SparseDocVector::from_entries({{0, 1.0}});
  auto c = SparseDocVector::from_entries({{2, 4.0}});
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(b, c) == 0.0);
  CHECK(cosine(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::fabs(cosine(a, b) - 0.7071) < 1e-4);
  CHECK(cosine(SparseDocVector{}, a) == 0.0);
}

TEST_CASE("cosine is symmetric and within [0, 1] on random sparse pairs") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<TermId> term(0, 40);
  std::uniform_real_distribution<double> w(0.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<SparseDocVector::Entry> ea, eb;
    for (int k = 0; k < 8; ++k) {
      ea.push_back({term(rng), w(rng)});
      eb.push_back({term(rng), w(rng)});
    }
    auto a = SparseDocVector::from_entries(ea), b = SparseDocVector::from_entries(eb);
    CHECK(cosine(a, b) == cosine(b, a));
    CHECK(cosine(a, b) >= 0.0);
    CHECK(cosine(a, b) <= 1.0 + 1e-12);
  }
}

TEST_CASE("negative weights are rejected") {
  CHECK_THROWS_AS(SparseDocVector::from_entries({{0, -1.0}}), InvalidArgument);
}

TEST_CASE("stats") {
  auto c = fixture::jsonl("{\"text\":\"a b\"}\n{\"text\":\"a b c d\"}\n");
  CHECK(stats(c).avg_sparsity_s == 3.0);
  auto one = fixture::jsonl("{\"text\":\"p q r s t\"}\n");
  CHECK(stats(one).d == 5);
  CHECK(stats(one).avg_sparsity_s == 5.0);
  CHECK_THROWS_AS(stats(Corpus{}), EmptyCorpusError);
}

TEST_CASE("jsonl round trip keeps documents, tags and ids") {
  auto c = fixture::jsonl(
      "{\"text\":\"z y y x\",\"tags\":[\"t2\",\"t1\"]}\n{\"text\":\"w\",\"tags\":[]}\n"
      "{\"text\":\"x w v\",\"tags\":[\"t1\"]}\n");
  std::stringstream ss;
  write_corpus_jsonl(c, ss);
  auto back = read_corpus(ss, CorpusFormat::kJsonl);
  CHECK(back.vocab == c.vocab);
  CHECK(back.tag_names == c.tag_names);
  CHECK(back.docs == c.docs);
  CHECK(back.tags == c.tags);
}

TEST_CASE("fixed-vocabulary reading drops unknown terms") {
  auto train = fixture::jsonl("{\"text\":\"a b\",\"tags\":[\"x\"]}\n");
  std::istringstream in("{\"text\":\"a q\",\"tags\":[\"y\"]}\n");
  auto test = read_corpus_with_vocab(in, CorpusFormat::kJsonl, train.vocab, train.tag_names);
  CHECK(test.d() == 2);
  CHECK(test.docs[0].nnz() == 1);
  CHECK(test.q() == 2);
  CHECK(vectorize_text("b b unknown", train.vocab).total_weight() == 2.0);
}
