#include "mthash/fuse_decision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "mthash/binary_io.hpp"
#include "mthash/error.hpp"
#include "mthash/linear_hash.hpp"
#include "mthash/log.hpp"

namespace mthash {

std::size_t MultiViewModel::n() const {
  return views.empty() ? 0 : static_cast<std::size_t>(views[0].X.rows());
}

Eigen::MatrixXd MultiViewModel::predict() const {
  if (views.empty()) throw InvalidArgument("MultiViewModel: no views");
  if (W.size() != views.size() || static_cast<std::size_t>(alpha.size()) != views.size()) {
    throw ShapeMismatch("MultiViewModel: W and alpha must have one entry per view");
  }
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(views[0].X.rows(), W[0].cols());
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (views[k].X.cols() != W[k].rows() || W[k].cols() != P.cols() || views[k].X.rows() != P.rows()) {
      throw ShapeMismatch("MultiViewModel: inconsistent view shapes");
    }
    if (alpha[static_cast<Eigen::Index>(k)] != 0.0) P.noalias() += alpha[static_cast<Eigen::Index>(k)] * (views[k].X * W[k]);
  }
  return P;
}

double multiview_objective(const MultiViewModel& model, const Eigen::MatrixXd& Y) {
  const Eigen::MatrixXd P = model.predict();
  if (Y.rows() != P.rows() || Y.cols() != P.cols()) throw ShapeMismatch("multiview_objective: Y has the wrong shape");
  double lap = 0.0;
  for (const auto& v : model.views) {
    if (v.laplacian.rows() != Y.rows() || v.laplacian.cols() != Y.rows()) {
      throw ShapeMismatch("multiview_objective: Laplacian size differs from n");
    }
    lap += (Y.transpose() * (v.laplacian * Y)).trace();
  }
  double reg = 0.0;
  for (const auto& w : model.W) reg += w.squaredNorm();
  return model.C1 * lap + model.C2 * (Y - P).squaredNorm() + reg;
}

namespace {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& A) {
  return A.rowwise() - A.colwise().mean();
}

// l smallest eigenvectors of C (C1 L + C2 (I - Q Q^T)) C + sigma 11^T / n
// with C the centring projector and Q an orthonormal basis of the centred
// prediction space (empty for the Laplacian-only problem).
Eigen::MatrixXd eigen_candidate(const Eigen::MatrixXd& L_dense, const Eigen::MatrixXd& Q,
                                double C1, double C2, double sigma, std::size_t l) {
  const Eigen::Index n = L_dense.rows();
  Eigen::MatrixXd A = center_columns(L_dense);
  A = A.colwise() - A.rowwise().mean();
  A *= C1;
  if (C2 != 0.0) {
    A.diagonal().array() += C2;
    A.array() -= C2 / static_cast<double>(n);
    if (Q.cols() > 0) A.noalias() -= C2 * (Q * Q.transpose());
  }
  A.array() += sigma / static_cast<double>(n);
  A = 0.5 * (A + A.transpose());
  auto eig = symmetric_eig(A);
  return eig.vectors.leftCols(static_cast<Eigen::Index>(l));
}

Eigen::MatrixXd prediction_basis(const Eigen::MatrixXd& P) {
  Eigen::MatrixXd Pc = center_columns(P);
  if (Pc.cwiseAbs().maxCoeff() == 0.0) return Eigen::MatrixXd(P.rows(), 0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Pc);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(P.rows(), r);
  return Q;
}

struct Problem {
  std::vector<View>& views;
  SparseMatrix L;  // sum of view Laplacians
  Eigen::MatrixXd L_dense;
  double C1, C2, lambda_bound, sigma;
};

double y_objective(const Problem& pb, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& P) {
  return pb.C1 * (Y.transpose() * (pb.L * Y)).trace() + pb.C2 * (Y - P).squaredNorm();
}

void w_step(const Problem& pb, MultiViewModel& m, const Eigen::MatrixXd& Y) {
  const std::size_t M = m.M();
  for (std::size_t k = 0; k < M; ++k) {
    const double a = m.alpha[static_cast<Eigen::Index>(k)];
    const auto& X = m.views[k].X;
    Eigen::MatrixXd R = Y;
    for (std::size_t j = 0; j < M; ++j) {
      const double aj = m.alpha[static_cast<Eigen::Index>(j)];
      if (j != k && aj != 0.0) R.noalias() -= aj * (m.views[j].X * m.W[j]);
    }
    Eigen::MatrixXd A = (pb.C2 * a * a) * (X.transpose() * X);
    A.diagonal().array() += 1.0;
    m.W[k] = A.ldlt().solve((pb.C2 * a) * (X.transpose() * R));
  }
}

void alpha_step(const Problem& pb, MultiViewModel& m, const Eigen::MatrixXd& Y, int steps) {
  const auto M = static_cast<Eigen::Index>(m.M());
  std::vector<Eigen::MatrixXd> Z(m.M());
  for (std::size_t k = 0; k < m.M(); ++k) Z[k] = m.views[k].X * m.W[k];
  Eigen::MatrixXd G(M, M);
  Eigen::VectorXd b(M);
  for (Eigen::Index j = 0; j < M; ++j) {
    b[j] = (Y.array() * Z[static_cast<std::size_t>(j)].array()).sum();
    for (Eigen::Index k = 0; k <= j; ++k) {
      G(j, k) = G(k, j) = (Z[static_cast<std::size_t>(j)].array() * Z[static_cast<std::size_t>(k)].array()).sum();
    }
  }
  // h(alpha) = C2 (alpha^T G alpha - 2 b^T alpha) + const.
  auto h = [&](const Eigen::VectorXd& a) { return pb.C2 * (a.dot(G * a) - 2.0 * b.dot(a)); };
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * pb.C2 * es.eigenvalues().maxCoeff();
  Eigen::VectorXd a = simplex_project(m.alpha);
  double best = h(a);
  if (lipschitz > 0.0) {
    for (int s = 0; s < steps; ++s) {
      Eigen::VectorXd grad = 2.0 * pb.C2 * (G * a - b);
      Eigen::VectorXd next = simplex_project(a - grad / lipschitz);
      const double v = h(next);
      if (!(v <= best)) break;
      const bool stalled = (next - a).cwiseAbs().maxCoeff() < 1e-15;
      a = next;
      best = v;
      if (stalled) break;
    }
  }
  for (Eigen::Index k = 0; k < M; ++k) a[k] = std::max(a[k], 0.0);
  m.alpha = a;
  m.alpha /= m.alpha.sum();
}

Eigen::MatrixXd y_step(const Problem& pb, const Eigen::MatrixXd& Y_cur, const Eigen::MatrixXd& P,
                       std::size_t l, int refine_steps) {
  Eigen::MatrixXd Q = prediction_basis(P);
  Eigen::MatrixXd Y_eig = eigen_candidate(pb.L_dense, Q, pb.C1, pb.C2, pb.sigma, l);
  Eigen::MatrixXd Y = Y_cur;
  double f = y_objective(pb, Y_cur, P);
  const double f_eig = y_objective(pb, Y_eig, P);
  if (f_eig < f) {
    Y = Y_eig;
    f = f_eig;
  }
  // Majorize-minimize: on the feasible set, f(Y) is bounded above by a linear
  // function of Y whose minimiser is the polar factor of the centred B.
  for (int s = 0; s < refine_steps; ++s) {
    Eigen::MatrixXd B = pb.C2 * P + pb.C1 * (pb.lambda_bound * Y - pb.L * Y);
    B = center_columns(B);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv.minCoeff() <= 1e-12 * std::max(1.0, sv.maxCoeff())) break;
    Eigen::MatrixXd next = svd.matrixU() * svd.matrixV().transpose();
    const double fn = y_objective(pb, next, P);
    if (!(fn < f)) break;
    const double gain = f - fn;
    Y = std::move(next);
    f = fn;
    if (gain <= 1e-12 * std::max(1.0, std::abs(f))) break;
  }
  return Y;
}

}  // namespace

DecFit fit_codes_dec(std::vector<View> views, std::size_t l, const DecParams& params) {
  if (views.empty()) throw InvalidArgument("fit_codes_dec: need at least one view");
  if (!(params.C1 > 0.0) || !(params.C2 >= 0.0)) {
    throw InvalidArgument("fit_codes_dec: C1 must be positive and C2 non-negative");
  }
  if (params.max_iters < 0) throw InvalidArgument("fit_codes_dec: max_iters must be non-negative");
  const Eigen::Index n = views[0].X.rows();
  if (l == 0 || static_cast<Eigen::Index>(l) > n - 1) {
    throw InvalidArgument("fit_codes_dec: need 1 <= l <= n - 1");
  }
  for (const auto& v : views) {
    if (v.X.rows() != n || v.laplacian.rows() != n || v.laplacian.cols() != n) {
      throw ShapeMismatch("fit_codes_dec: every view must cover the same n documents");
    }
  }

  DecFit fit;
  MultiViewModel& m = fit.model;
  m.views = std::move(views);
  m.C1 = params.C1;
  m.C2 = params.C2;
  const std::size_t M = m.M();
  m.alpha = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(M), 1.0 / static_cast<double>(M));
  for (const auto& v : m.views) m.W.push_back(Eigen::MatrixXd::Zero(v.X.cols(), static_cast<Eigen::Index>(l)));

  Problem pb{m.views, SparseMatrix(n, n), {}, params.C1, params.C2, 0.0, 0.0};
  for (const auto& v : m.views) pb.L += v.laplacian;
  pb.L_dense = Eigen::MatrixXd(pb.L);
  pb.L_dense = 0.5 * (pb.L_dense + pb.L_dense.transpose());
  // Each normalised Laplacian has spectrum in [0, 2].
  pb.lambda_bound = 2.0 * static_cast<double>(M);
  pb.sigma = params.C1 * pb.lambda_bound + params.C2 + 1.0;

  Eigen::MatrixXd Y = eigen_candidate(pb.L_dense, Eigen::MatrixXd(n, 0), params.C1, 0.0, pb.sigma, l);
  double f = multiview_objective(m, Y);
  m.objective_trace.push_back(f);
  for (int it = 0; it < params.max_iters; ++it) {
    w_step(pb, m, Y);
    alpha_step(pb, m, Y, params.alpha_steps);
    Y = y_step(pb, Y, m.predict(), l, params.refine_steps);
    const double next = multiview_objective(m, Y);
    m.objective_trace.push_back(next);
    const double change = std::abs(f - next) / std::max(std::abs(f), 1e-300);
    f = next;
    if (change < params.tol) {
      m.converged = true;
      break;
    }
  }
  if (!m.converged && params.max_iters > 0) {
    warn("decision-level fusion stopped at max_iters=" + std::to_string(params.max_iters) +
         " before reaching tol");
  }
  fit.Y = Y;
  fit.codes = median_binarize(Y);
  fit.thresholds = column_medians(m.predict());
  return fit;
}

DecFit fit_codes_dec(const ThetaTable& thetas, std::span<const TagSet> tags,
                     const SelectionResult& selection, std::size_t l,
                     const AffinityParams& affinity, const DecParams& params) {
  if (thetas.size() != selection.M()) throw ShapeMismatch("fit_codes_dec: one theta column per selected model");
  std::vector<std::future<View>> jobs;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      const auto& col = thetas[k];
      View v;
      v.K = selection.Ks[k];
      v.X.resize(static_cast<Eigen::Index>(col.size()), v.K);
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (col[i].size() != static_cast<std::size_t>(v.K)) throw ShapeMismatch("fit_codes_dec: theta length differs from K");
        for (int t = 0; t < v.K; ++t) v.X(static_cast<Eigen::Index>(i), t) = col[i][static_cast<std::size_t>(t)];
      }
      v.laplacian = degree_and_laplacian(build_affinity(v.X, tags, affinity), true).laplacian;
      return v;
    }));
  }
  std::vector<View> views;
  for (auto& j : jobs) views.push_back(j.get());
  return fit_codes_dec(std::move(views), l, params);
}

DecFit fit_codes_dec(const Corpus& corpus, const SelectionResult& selection,
                     const TopicModelBank& bank, std::size_t l, const AffinityParams& affinity,
                     const DecParams& params) {
  auto models = bank.subset(selection.Ks);
  return fit_codes_dec(infer_table(models, corpus), corpus.tags, selection, l, affinity, params);
}

DecModel DecModel::from_fit(const DecFit& fit) {
  DecModel d;
  for (const auto& v : fit.model.views) d.Ks.push_back(v.K);
  d.alpha = fit.model.alpha;
  d.C1 = fit.model.C1;
  d.C2 = fit.model.C2;
  d.W = fit.model.W;
  d.thresholds = fit.thresholds;
  return d;
}

HashCode DecModel::encode_views(std::span<const TopicDistribution> thetas) const {
  if (thetas.size() != W.size()) throw ShapeMismatch("DecModel: one theta per view");
  Eigen::VectorXd s = -thresholds;
  for (std::size_t k = 0; k < W.size(); ++k) {
    const double a = alpha[static_cast<Eigen::Index>(k)];
    if (a == 0.0) continue;
    if (thetas[k].size() != static_cast<std::size_t>(W[k].rows())) throw ShapeMismatch("DecModel: theta length differs from K");
    Eigen::Map<const Eigen::VectorXd> th(thetas[k].theta.data(), W[k].rows());
    s.noalias() += a * (W[k].transpose() * th);
  }
  return sign_code(s);
}

HashCode DecModel::encode(std::span<const TopicModel* const> models, const SparseDocVector& x) const {
  if (models.size() != Ks.size()) throw ShapeMismatch("DecModel::encode: one topic model per view");
  for (std::size_t k = 0; k < Ks.size(); ++k) {
    if (models[k]->num_topics() != Ks[k]) throw ShapeMismatch("DecModel::encode: topic model order differs from Ks");
  }
  auto thetas = infer_multi(models, x, infer_salt);
  return encode_views(thetas);
}

HashCode encode_dec(const DecModel& model, std::span<const TopicModel* const> models,
                    const SparseDocVector& x) {
  return model.encode(models, x);
}

namespace {
constexpr char kDecMagic[9] = "MTHDEC01";
constexpr std::uint32_t kVariantDec = 2;
}  // namespace

void DecModel::save(const std::filesystem::path& path) const {
  const std::size_t M = Ks.size();
  if (W.size() != M || static_cast<std::size_t>(alpha.size()) != M) throw ShapeMismatch("DecModel::save: inconsistent view count");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  io::write_magic(os, kDecMagic);
  io::write_u32(os, kVariantDec);
  io::write_u32(os, static_cast<std::uint32_t>(l()));
  io::write_u32(os, static_cast<std::uint32_t>(M));
  for (int K : Ks) io::write_u32(os, static_cast<std::uint32_t>(K));
  io::write_f64s(os, alpha.data(), M);
  io::write_f64(os, C1);
  io::write_f64(os, C2);
  io::write_u64(os, infer_salt);
  for (std::size_t k = 0; k < M; ++k) {
    if (W[k].rows() != Ks[k] || static_cast<std::size_t>(W[k].cols()) != l()) {
      throw ShapeMismatch("DecModel::save: W shape differs from (K, l)");
    }
    for (Eigen::Index i = 0; i < W[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < W[k].cols(); ++j) io::write_f64(os, W[k](i, j));
    }
  }
  io::write_f64s(os, thresholds.data(), l());
  io::write_u32(os, static_cast<std::uint32_t>(topic_files.size()));
  for (const auto& f : topic_files) {
    io::write_u32(os, static_cast<std::uint32_t>(f.size()));
    os.write(f.data(), static_cast<std::streamsize>(f.size()));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

DecModel DecModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file " + path.string());
  io::expect_magic(is, kDecMagic, "decision-level hash model");
  if (io::read_u32(is) != kVariantDec) throw IoError("unexpected model variant in " + path.string());
  DecModel d;
  const auto l = io::read_u32(is);
  const auto M = io::read_u32(is);
  if (M > 1024) throw IoError("implausible view count in " + path.string());
  d.Ks.resize(M);
  for (auto& K : d.Ks) K = static_cast<int>(io::read_u32(is));
  d.alpha.resize(M);
  io::read_f64s(is, d.alpha.data(), M);
  d.C1 = io::read_f64(is);
  d.C2 = io::read_f64(is);
  d.infer_salt = io::read_u64(is);
  for (std::uint32_t k = 0; k < M; ++k) {
    Eigen::MatrixXd w(d.Ks[k], l);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = io::read_f64(is);
    }
    d.W.push_back(std::move(w));
  }
  d.thresholds.resize(l);
  io::read_f64s(is, d.thresholds.data(), l);
  const auto files = io::read_u32(is);
  for (std::uint32_t i = 0; i < files; ++i) {
    const auto len = io::read_u32(is);
    if (len > (1u << 20)) throw IoError("implausible string length in model file");
    std::string s(len, '\0');
    if (!is.read(s.data(), len)) throw IoError("unexpected end of file");
    d.topic_files.push_back(std::move(s));
  }
  return d;
}

}  // namespace mthash
