#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "mthash/corpus.hpp"
#include "mthash/hash_code.hpp"

namespace mthash {

/// Bit j = sgn(W(:, j) . x + bias_j), with sgn(0) = +1.
struct LinearHashFunction {
  Eigen::MatrixXd W;     // input dimension x l
  Eigen::VectorXd bias;  // l

  std::size_t l() const noexcept { return static_cast<std::size_t>(W.cols()); }
  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(W.rows()); }

  Eigen::VectorXd scores(const Eigen::VectorXd& x) const;
  Eigen::VectorXd scores(const SparseDocVector& x) const;
  HashCode encode(const Eigen::VectorXd& x) const;
  HashCode encode(const SparseDocVector& x) const;
};

HashCode sign_code(const Eigen::VectorXd& scores);

}  // namespace mthash
