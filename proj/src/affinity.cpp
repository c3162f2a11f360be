#include "mthash/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <utility>

#include "mthash/error.hpp"

namespace mthash {

void AffinityParams::validate() const {
  if (!(1.0 >= a && a >= b && b > 0.0)) {
    throw InvalidArgument("tag confidences must satisfy 1 >= a >= b > 0");
  }
  if (k == 0) throw InvalidArgument("affinity graph needs k >= 1");
}

void AffinityGraph::export_triplets(std::ostream& out) const {
  for (int i = 0; i < S.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(S, i); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

AffinityGraph build_affinity(const Eigen::MatrixXd& features, std::span<const TagSet> tags,
                             const AffinityParams& params) {
  params.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (tags.size() != n) throw ShapeMismatch("build_affinity: one tag set per feature row");
  if (params.k >= n) {
    throw InvalidArgument("build_affinity: k=" + std::to_string(params.k) +
                          " must be smaller than n=" + std::to_string(n));
  }

  Eigen::MatrixXd unit = features;
  for (Eigen::Index i = 0; i < unit.rows(); ++i) {
    double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }

  const std::size_t k = params.k;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(n * k);
  constexpr Eigen::Index kBlock = 256;
  std::vector<std::pair<double, std::size_t>> row;
  row.reserve(n);
  auto closer = [](const std::pair<double, std::size_t>& x, const std::pair<double, std::size_t>& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  };
  for (Eigen::Index start = 0; start < unit.rows(); start += kBlock) {
    const Eigen::Index len = std::min(kBlock, unit.rows() - start);
    Eigen::MatrixXd gram = unit.middleRows(start, len) * unit.transpose();
    for (Eigen::Index r = 0; r < len; ++r) {
      const auto i = static_cast<std::size_t>(start + r);
      row.clear();
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) row.emplace_back(gram(r, static_cast<Eigen::Index>(j)), j);
      }
      std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end(), closer);
      for (std::size_t t = 0; t < k; ++t) {
        auto j = row[t].second;
        pairs.emplace_back(std::min(i, j), std::max(i, j));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * pairs.size());
  for (auto [i, j] : pairs) {
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    double cos = std::clamp(unit.row(ii).dot(unit.row(jj)), 0.0, 1.0);
    double s = (tags[i].intersects(tags[j]) ? params.a : params.b) * cos;
    if (s == 0.0) continue;
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), s);
    triplets.emplace_back(static_cast<int>(j), static_cast<int>(i), s);
  }

  AffinityGraph g;
  g.n = n;
  g.params = params;
  g.S.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  g.S.setFromTriplets(triplets.begin(), triplets.end());
  g.S.makeCompressed();
  return g;
}

DegreeLaplacian degree_and_laplacian(const AffinityGraph& graph, bool normalized) {
  const auto n = static_cast<Eigen::Index>(graph.n);
  DegreeLaplacian out;
  out.degree = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < graph.S.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(graph.S, i); it; ++it) out.degree[i] += it.value();
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(graph.S.nonZeros() + n));
  if (!normalized) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (out.degree[i] != 0.0) triplets.emplace_back(i, i, out.degree[i]);
    }
    for (Eigen::Index i = 0; i < graph.S.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(graph.S, i); it; ++it) {
        triplets.emplace_back(it.row(), it.col(), -it.value());
      }
    }
  } else {
    Eigen::VectorXd inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      inv_sqrt[i] = out.degree[i] > 0.0 ? 1.0 / std::sqrt(out.degree[i]) : 0.0;
      triplets.emplace_back(i, i, 1.0);
    }
    for (Eigen::Index i = 0; i < graph.S.outerSize(); ++i) {
      for (SparseMatrix::InnerIterator it(graph.S, i); it; ++it) {
        triplets.emplace_back(it.row(), it.col(),
                              -it.value() * inv_sqrt[it.row()] * inv_sqrt[it.col()]);
      }
    }
  }
  out.laplacian.resize(n, n);
  out.laplacian.setFromTriplets(triplets.begin(), triplets.end());
  out.laplacian.makeCompressed();
  return out;
}

}  // namespace mthash
