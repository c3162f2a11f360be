#include "mthash/linear_hash.hpp"

#include "mthash/error.hpp"

namespace mthash {

HashCode sign_code(const Eigen::VectorXd& scores) {
  HashCode c(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index j = 0; j < scores.size(); ++j) c.set(static_cast<std::size_t>(j), scores[j] >= 0.0);
  return c;
}

Eigen::VectorXd LinearHashFunction::scores(const Eigen::VectorXd& x) const {
  if (x.size() != W.rows()) throw ShapeMismatch("hash function input has the wrong dimension");
  return W.transpose() * x + bias;
}

Eigen::VectorXd LinearHashFunction::scores(const SparseDocVector& x) const {
  Eigen::VectorXd s = bias;
  for (const auto& e : x.entries()) {
    if (e.term < W.rows()) s += e.weight * W.row(e.term).transpose();
  }
  return s;
}

HashCode LinearHashFunction::encode(const Eigen::VectorXd& x) const { return sign_code(scores(x)); }

HashCode LinearHashFunction::encode(const SparseDocVector& x) const { return sign_code(scores(x)); }

}  // namespace mthash
