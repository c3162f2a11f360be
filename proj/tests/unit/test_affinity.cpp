#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "mthash/affinity.hpp"
#include "mthash/error.hpp"
#include "oracles.hpp"

using namespace mthash;

namespace {

Eigen::MatrixXd random_features(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd X(n, dim);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = u(rng);
  return X;
}

std::vector<TagSet> random_tags(std::size_t n, std::mt19937_64& rng) {
  std::vector<TagSet> tags;
  for (std::size_t i = 0; i < n; ++i) tags.emplace_back(std::vector<TagId>{static_cast<TagId>(rng() % 3)});
  return tags;
}

}  // namespace

TEST_CASE("affinity defaults and validation") {
  AffinityParams p;
  CHECK(p.k == 25);
  CHECK(p.a == 1.0);
  CHECK(p.b == 0.1);
  CHECK_THROWS_AS((AffinityParams{5, 0.1, 0.5}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AffinityParams{5, 1.0, 0.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((AffinityParams{0, 1.0, 0.1}.validate()), InvalidArgument);
}

TEST_CASE("identical documents sharing a tag") {
  Eigen::MatrixXd X(2, 3);
  X << 1, 2, 3, 1, 2, 3;
  std::vector<TagSet> tags{TagSet({0}), TagSet({0})};
  auto g = build_affinity(X, tags, {1, 1.0, 0.1});
  CHECK(g.S.coeff(0, 1) == doctest::Approx(1.0));
  std::vector<TagSet> disjoint{TagSet({0}), TagSet({1})};
  auto h = build_affinity(X, disjoint, {1, 1.0, 0.1});
  CHECK(h.S.coeff(0, 1) == doctest::Approx(0.1));
  CHECK(h.S.coeff(0, 0) == 0.0);
}

TEST_CASE("graph is symmetric and follows the union rule") {
  std::mt19937_64 rng(4);
  const std::size_t n = 40;
  auto X = random_features(n, 5, rng);
  auto tags = random_tags(n, rng);
  AffinityParams p{3, 1.0, 0.1};
  auto g = build_affinity(X, tags, p);
  Eigen::MatrixXd S = oracle::dense(g.S);
  CHECK((S - S.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // Brute-force the kNN union.
  Eigen::MatrixXd cos(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cos(i, j) = X.row(i).dot(X.row(j)) / (X.row(i).norm() * X.row(j).norm());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) if (j != i) others.push_back(j);
    std::sort(others.begin(), others.end(), [&](auto a, auto b) { return cos(i, a) > cos(i, b); });
    for (std::size_t r = 0; r < p.k; ++r) {
      const std::size_t j = others[r];
      const double c = tags[i].intersects(tags[j]) ? p.a : p.b;
      CHECK(S(i, j) == doctest::Approx(c * cos(i, j)).epsilon(1e-12));
    }
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(S(i, i) == 0.0);
}

TEST_CASE("rejects k >= n and mismatched tags") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
  std::vector<TagSet> tags(3);
  CHECK_THROWS_AS(build_affinity(X, tags, {3, 1.0, 0.1}), InvalidArgument);
  std::vector<TagSet> two(2);
  CHECK_THROWS_AS(build_affinity(X, two, {1, 1.0, 0.1}), ShapeMismatch);
}

TEST_CASE("two-node laplacian") {
  Eigen::MatrixXd S(2, 2);
  S << 0, 0.5, 0.5, 0;
  auto dl = degree_and_laplacian(fixture::graph_from(S), false);
  CHECK(dl.degree(0) == 0.5);
  CHECK(dl.degree(1) == 0.5);
  Eigen::MatrixXd L = oracle::dense(dl.laplacian);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((L - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian rows cancel and the form is positive semi-definite") {
  std::mt19937_64 rng(9);
  auto S = fixture::random_graph(15, rng);
  auto dl = degree_and_laplacian(fixture::graph_from(S), false);
  Eigen::MatrixXd L = oracle::dense(dl.laplacian);
  CHECK((L * Eigen::VectorXd::Ones(15)).cwiseAbs().maxCoeff() < 1e-12);
  auto nl = degree_and_laplacian(fixture::graph_from(S), true);
  Eigen::MatrixXd Ln = oracle::dense(nl.laplacian);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd v(15);
    for (auto& x : v) x = g(rng);
    v.normalize();
    CHECK(v.dot(L * v) >= -1e-9);
    CHECK(v.dot(Ln * v) >= -1e-9);
  }
}

TEST_CASE("isolated node gets an identity row in the normalised laplacian") {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(3, 3);
  S(0, 1) = S(1, 0) = 0.7;
  auto dl = degree_and_laplacian(fixture::graph_from(S), true);
  Eigen::MatrixXd L = oracle::dense(dl.laplacian);
  CHECK(L(2, 2) == 1.0);
  CHECK(L(2, 0) == 0.0);
  CHECK(L(2, 1) == 0.0);
  CHECK(L(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("raising a never lowers tag-sharing edges") {
  std::mt19937_64 rng(5);
  auto X = random_features(30, 4, rng);
  auto tags = random_tags(30, rng);
  Eigen::MatrixXd lo = oracle::dense(build_affinity(X, tags, {4, 0.5, 0.1}).S);
  Eigen::MatrixXd hi = oracle::dense(build_affinity(X, tags, {4, 0.9, 0.1}).S);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (Eigen::Index j = 0; j < 30; ++j)
      if (tags[i].intersects(tags[j])) CHECK(hi(i, j) >= lo(i, j));
}

TEST_CASE("triplet export lists every stored entry") {
  Eigen::MatrixXd S(2, 2);
  S << 0, 0.25, 0.25, 0;
  std::ostringstream os;
  fixture::graph_from(S).export_triplets(os);
  std::istringstream in(os.str());
  int lines = 0;
  std::size_t i, j;
  double s;
  while (in >> i >> j >> s) {
    CHECK(s == 0.25);
    ++lines;
  }
  CHECK(lines == 2);
}
