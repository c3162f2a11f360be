#pragma once

// Small corpora and graphs shared by the unit tests.

#include <cstddef>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mthash/affinity.hpp"
#include "mthash/corpus.hpp"

namespace fixture {

inline mthash::Corpus jsonl(const std::string& text) {
  std::istringstream in(text);
  return mthash::read_corpus(in, mthash::CorpusFormat::kJsonl);
}

/// Graph from a dense symmetric matrix.
inline mthash::AffinityGraph graph_from(const Eigen::MatrixXd& S) {
  mthash::AffinityGraph g;
  g.n = static_cast<std::size_t>(S.rows());
  g.S = S.sparseView();
  g.S.makeCompressed();
  return g;
}

/// Connected random symmetric graph: a spanning path plus random extra edges.
inline Eigen::MatrixXd random_graph(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> w(0.05, 1.0), coin(0.0, 1.0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i + 1 < n; ++i) S(i, i + 1) = S(i + 1, i) = w(rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (coin(rng) < 0.35) S(i, j) = S(j, i) = w(rng);
  return S;
}

}  // namespace fixture
