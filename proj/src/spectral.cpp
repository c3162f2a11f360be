#include "mthash/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "mthash/error.hpp"

namespace mthash {

SymmetricEigen symmetric_eig(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw ShapeMismatch("symmetric_eig: matrix is not square");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidArgument("symmetric_eig: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
  if (solver.info() != Eigen::Success) throw Error("symmetric_eig: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

void fix_signs(Eigen::MatrixXd& Y) {
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    const double tol = 1e-9 * Y.col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      if (std::abs(Y(i, j)) > tol) {
        if (Y(i, j) < 0.0) Y.col(j) = -Y.col(j);
        break;
      }
    }
  }
}

// Smallest eigenpairs of the (deflated) normalised Laplacian by orthogonal
// iteration on 2I - L, which is PSD with the wanted pairs on top.
void smallest_by_iteration(const SparseMatrix& lap, const Eigen::VectorXd& trivial, std::size_t l,
                           const EigenmapOptions& opt, Eigen::MatrixXd& vectors,
                           Eigen::VectorXd& values) {
  const Eigen::Index n = lap.rows();
  const auto block = static_cast<Eigen::Index>(std::min<std::size_t>(l + 8, static_cast<std::size_t>(n - 1)));
  Eigen::MatrixXd Q(n, block);
  // Deterministic start: a fixed pseudo-random pattern.
  std::uint64_t state = 0x2545F4914F6CDD1DULL;
  for (Eigen::Index j = 0; j < block; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      state ^= state << 13;
      state ^= state >> 7;
      state ^= state << 17;
      Q(i, j) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
  }
  auto deflate = [&](Eigen::MatrixXd& M) { M -= trivial * (trivial.transpose() * M); };
  auto orthonormalize = [&](Eigen::MatrixXd& M) {
    deflate(M);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    M = qr.householderQ() * Eigen::MatrixXd::Identity(n, M.cols());
  };
  orthonormalize(Q);
  Eigen::VectorXd prev = Eigen::VectorXd::Constant(block, -1.0);
  Eigen::MatrixXd ritz_vectors;
  Eigen::VectorXd ritz_values;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    Eigen::MatrixXd Z = 2.0 * Q - lap * Q;
    orthonormalize(Z);
    Q = Z;
    if (iter % 10 == 9 || iter == opt.max_iterations - 1) {
      Eigen::MatrixXd small = Q.transpose() * (lap * Q);
      small = 0.5 * (small + small.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(small);
      ritz_values = es.eigenvalues();
      ritz_vectors = Q * es.eigenvectors();
      Q = ritz_vectors;
      const double change = (ritz_values.head(static_cast<Eigen::Index>(l)) -
                             prev.head(static_cast<Eigen::Index>(l)))
                                .cwiseAbs()
                                .maxCoeff();
      prev = ritz_values;
      if (change < opt.tolerance) break;
    }
  }
  vectors = ritz_vectors.leftCols(static_cast<Eigen::Index>(l));
  values = ritz_values.head(static_cast<Eigen::Index>(l));
}

}  // namespace

Embedding laplacian_eigenmap(const AffinityGraph& graph, std::size_t l,
                             const EigenmapOptions& options) {
  const std::size_t n = graph.n;
  if (l == 0 || n < 2 || l > n - 1) {
    throw InvalidArgument("laplacian_eigenmap: need 1 <= l <= n - 1 (l=" + std::to_string(l) +
                          ", n=" + std::to_string(n) + ")");
  }
  auto dl = degree_and_laplacian(graph, /*normalized=*/true);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd sqrt_deg = dl.degree.cwiseSqrt();
  Eigen::VectorXd inv_sqrt(N);
  for (Eigen::Index i = 0; i < N; ++i) inv_sqrt[i] = sqrt_deg[i] > 0.0 ? 1.0 / sqrt_deg[i] : 0.0;

  // The trivial solution v = 1 corresponds to u = D^1/2 1 in the normalised
  // problem; deflate it so every returned vector is D-orthogonal to 1.
  Eigen::VectorXd trivial = sqrt_deg;
  const double tnorm = trivial.norm();
  if (tnorm > 0.0) {
    trivial /= tnorm;
  } else {
    trivial = Eigen::VectorXd::Constant(N, 1.0 / std::sqrt(static_cast<double>(N)));
  }

  Eigen::MatrixXd U;
  Eigen::VectorXd values;
  if (n <= options.dense_limit) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(dl.laplacian);
    dense = 0.5 * (dense + dense.transpose());
    dense += 3.0 * trivial * trivial.transpose();
    auto eig = symmetric_eig(dense);
    U = eig.vectors.leftCols(static_cast<Eigen::Index>(l));
    values = eig.values.head(static_cast<Eigen::Index>(l));
  } else {
    smallest_by_iteration(dl.laplacian, trivial, l, options, U, values);
  }

  Embedding e;
  e.Y = inv_sqrt.asDiagonal() * U;
  fix_signs(e.Y);
  e.eigenvalues = values;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (std::abs(values[j]) < 1e-9) e.near_zero.push_back(static_cast<std::size_t>(j));
  }
  return e;
}

Eigen::VectorXd column_medians(const Eigen::MatrixXd& Y) {
  const Eigen::Index n = Y.rows();
  Eigen::VectorXd m(Y.cols());
  if (n == 0) return Eigen::VectorXd::Zero(Y.cols());
  const Eigen::Index rank = (n + 1) / 2 - 1;  // ceil(n/2)-th smallest, 0-based
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < Y.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = Y(i, j);
    std::nth_element(col.begin(), col.begin() + rank, col.end());
    m[j] = col[static_cast<std::size_t>(rank)];
  }
  return m;
}

CodeMatrix median_binarize(const Eigen::MatrixXd& Y) {
  CodeMatrix c;
  c.n = static_cast<std::size_t>(Y.rows());
  c.l = static_cast<std::size_t>(Y.cols());
  c.median = column_medians(Y);
  c.bits.resize(c.n * c.l);
  for (std::size_t i = 0; i < c.n; ++i) {
    for (std::size_t j = 0; j < c.l; ++j) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      c.bits[i * c.l + j] = Y(ii, jj) > c.median[jj] ? 1 : -1;
    }
  }
  return c;
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw InvalidArgument("simplex_project: empty vector");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double running = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    running += u[j];
    const double candidate = (running - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd w = (v.array() - theta).cwiseMax(0.0);
  // Renormalise away rounding so the sum is 1 to machine precision.
  const double s = w.sum();
  if (s > 0.0) w /= s;
  return w;
}

}  // namespace mthash
