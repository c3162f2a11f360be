#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mthash/corpus.hpp"

namespace mthash {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct AffinityParams {
  std::size_t k = 25;
  double a = 1.0;  // confidence for tag-sharing pairs
  double b = 0.1;  // confidence for pairs sharing no tag

  /// Throws unless 1 >= a >= b > 0.
  void validate() const;
};

/// Symmetric kNN similarity graph with tag confidences; no diagonal entries.
struct AffinityGraph {
  std::size_t n = 0;
  SparseMatrix S;
  AffinityParams params;

  /// Writes one `i j s_ij` line per stored entry (both triangles).
  void export_triplets(std::ostream& out) const;
};

/// s_ij = c_ij * cos(x_i, x_j) when i is among the k nearest neighbours of j
/// or vice versa; c_ij = a when the tag sets intersect, b otherwise. Features
/// are the rows of `features`.
AffinityGraph build_affinity(const Eigen::MatrixXd& features, std::span<const TagSet> tags,
                             const AffinityParams& params);

struct DegreeLaplacian {
  Eigen::VectorXd degree;
  SparseMatrix laplacian;
};

/// L = D - S, or the symmetric normalised I - D^-1/2 S D^-1/2 where
/// zero-degree rows become identity rows.
DegreeLaplacian degree_and_laplacian(const AffinityGraph& graph, bool normalized);

}  // namespace mthash
