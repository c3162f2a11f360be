#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mthash/affinity.hpp"

namespace mthash {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

/// Dense symmetric eigendecomposition. Throws when A is not symmetric to 1e-9.
SymmetricEigen symmetric_eig(const Eigen::MatrixXd& A);

struct EigenmapOptions {
  // Graphs up to this size are solved densely; larger ones by orthogonal
  // iteration on the sparse normalised operator.
  std::size_t dense_limit = 5000;
  int max_iterations = 5000;
  double tolerance = 1e-10;
};

/// Real-valued relaxation of the codes. Columns are D-orthonormal and
/// D-orthogonal to the constant vector.
struct Embedding {
  Eigen::MatrixXd Y;            // n x l
  Eigen::VectorXd eigenvalues;  // ascending
  // Indices of returned eigenvalues below 1e-9 (extra connected components).
  std::vector<std::size_t> near_zero;
};

/// Solves L v = lambda D v and returns the l smallest non-trivial
/// eigenvectors, ascending; each column's first non-negligible entry is
/// positive. Requires l <= n - 1.
Embedding laplacian_eigenmap(const AffinityGraph& graph, std::size_t l,
                             const EigenmapOptions& options = {});

/// n x l matrix of +1/-1 bits with the per-column thresholds that made it.
struct CodeMatrix {
  std::size_t n = 0;
  std::size_t l = 0;
  std::vector<std::int8_t> bits;  // row-major
  Eigen::VectorXd median;

  std::int8_t at(std::size_t i, std::size_t j) const { return bits[i * l + j]; }
  bool operator==(const CodeMatrix& other) const {
    return n == other.n && l == other.l && bits == other.bits;
  }
};

/// Per column: the ceil(n/2)-th smallest value.
Eigen::VectorXd column_medians(const Eigen::MatrixXd& Y);

/// bit = +1 where the value is strictly above its column median, else -1.
CodeMatrix median_binarize(const Eigen::MatrixXd& Y);
inline CodeMatrix median_binarize(const Embedding& e) { return median_binarize(e.Y); }

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd simplex_project(const Eigen::VectorXd& v);

}  // namespace mthash
