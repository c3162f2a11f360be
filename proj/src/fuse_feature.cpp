#include "mthash/fuse_feature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "mthash/binary_io.hpp"
#include "mthash/error.hpp"
#include "mthash/log.hpp"

namespace mthash {

Eigen::VectorXd fuse(std::span<const TopicDistribution> thetas, std::span<const double> mu_hat) {
  if (thetas.size() != mu_hat.size()) throw ShapeMismatch("fuse: one weight per topic distribution");
  std::size_t total = 0;
  for (const auto& t : thetas) total += t.size();
  Eigen::VectorXd omega(static_cast<Eigen::Index>(total));
  Eigen::Index at = 0;
  for (std::size_t m = 0; m < thetas.size(); ++m) {
    for (double v : thetas[m].theta) omega[at++] = mu_hat[m] * v;
  }
  return omega;
}

Eigen::MatrixXd fuse_table(const ThetaTable& thetas, std::span<const double> mu_hat) {
  if (thetas.size() != mu_hat.size()) throw ShapeMismatch("fuse_table: one weight per model");
  if (thetas.empty()) throw InvalidArgument("fuse_table: no models");
  const std::size_t n = thetas[0].size();
  std::size_t total = 0;
  for (const auto& col : thetas) {
    if (col.size() != n) throw ShapeMismatch("fuse_table: models disagree on document count");
    if (n > 0) total += col[0].size();
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(total));
  Eigen::Index offset = 0;
  for (std::size_t m = 0; m < thetas.size(); ++m) {
    const std::size_t K = n > 0 ? thetas[m][0].size() : 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& th = thetas[m][i].theta;
      if (th.size() != K) throw ShapeMismatch("fuse_table: inconsistent theta length");
      for (std::size_t k = 0; k < K; ++k) {
        out(static_cast<Eigen::Index>(i), offset + static_cast<Eigen::Index>(k)) = mu_hat[m] * th[k];
      }
    }
    offset += static_cast<Eigen::Index>(K);
  }
  return out;
}

double HashFunctionFit::mean_accuracy() const {
  if (train_accuracy.empty()) return 0.0;
  return std::accumulate(train_accuracy.begin(), train_accuracy.end(), 0.0) /
         static_cast<double>(train_accuracy.size());
}

namespace {

struct DenseRows {
  const Eigen::MatrixXd& X;
  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
  double dot(std::size_t i, const Eigen::VectorXd& w) const {
    return X.row(static_cast<Eigen::Index>(i)).dot(w);
  }
  void axpy(std::size_t i, double s, Eigen::VectorXd& w) const {
    w += s * X.row(static_cast<Eigen::Index>(i)).transpose();
  }
  double sq_norm(std::size_t i) const { return X.row(static_cast<Eigen::Index>(i)).squaredNorm(); }
};

struct SparseRows {
  std::span<const SparseDocVector> X;
  std::size_t d;
  std::size_t n() const { return X.size(); }
  std::size_t dim() const { return d; }
  double dot(std::size_t i, const Eigen::VectorXd& w) const {
    double s = 0.0;
    for (const auto& e : X[i].entries()) s += e.weight * w[e.term];
    return s;
  }
  void axpy(std::size_t i, double s, Eigen::VectorXd& w) const {
    for (const auto& e : X[i].entries()) w[e.term] += s * e.weight;
  }
  double sq_norm(std::size_t i) const { return X[i].norm() * X[i].norm(); }
};

// Dual coordinate descent for min 1/2 |w|^2 + C sum max(0, 1 - y_i w.x_i),
// with the bias folded in as a constant feature of value 1.
template <class Rows>
void fit_one_bit(const Rows& rows, const std::vector<double>& y, const SvmParams& p,
                 const std::vector<std::size_t>& order_seed, std::uint64_t seed,
                 Eigen::VectorXd& w, double& b) {
  const std::size_t n = rows.n();
  const double extra = p.bias ? 1.0 : 0.0;
  std::vector<double> alpha(n, 0.0), qii(n);
  for (std::size_t i = 0; i < n; ++i) qii[i] = rows.sq_norm(i) + extra;
  w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.dim()));
  b = 0.0;
  std::vector<std::size_t> order = order_seed;
  std::mt19937_64 rng(seed);
  for (int epoch = 0; epoch < p.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -INFINITY, pg_min = INFINITY;
    for (std::size_t i : order) {
      if (qii[i] <= 0.0) continue;
      const double G = y[i] * (rows.dot(i, w) + b) - 1.0;
      double pg = G;
      if (alpha[i] == 0.0) {
        pg = std::min(G, 0.0);
      } else if (alpha[i] == p.C) {
        pg = std::max(G, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-12) {
        const double old = alpha[i];
        alpha[i] = std::clamp(old - G / qii[i], 0.0, p.C);
        const double delta = (alpha[i] - old) * y[i];
        rows.axpy(i, delta, w);
        b += delta * extra;
      }
    }
    if (pg_max - pg_min < p.tolerance) break;
  }
}

template <class Rows>
HashFunctionFit train_impl(const Rows& rows, const CodeMatrix& codes, const SvmParams& p) {
  if (codes.n != rows.n()) throw ShapeMismatch("train_hash_fn: one feature row per code");
  if (p.C <= 0.0) throw InvalidArgument("train_hash_fn: C must be positive");
  if (p.max_epochs <= 0) throw InvalidArgument("train_hash_fn: max_epochs must be positive");
  const std::size_t n = rows.n(), l = codes.l;
  HashFunctionFit fit;
  fit.fn.W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.dim()), static_cast<Eigen::Index>(l));
  fit.fn.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l));
  fit.train_accuracy.assign(l, 1.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> y(n);
  for (std::size_t j = 0; j < l; ++j) {
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = codes.at(i, j) > 0 ? 1.0 : -1.0;
      (y[i] > 0 ? has_pos : has_neg) = true;
    }
    const auto jj = static_cast<Eigen::Index>(j);
    if (!(has_pos && has_neg)) {
      // Constant labels: predict the constant through the bias alone.
      fit.constant_bits.push_back(j);
      fit.fn.bias[jj] = has_neg ? -1.0 : 1.0;
      warn("hash bit " + std::to_string(j) + " has constant training labels; using a constant predictor");
      continue;
    }
    Eigen::VectorXd w;
    double b = 0.0;
    fit_one_bit(rows, y, p, order, p.seed + j, w, b);
    fit.fn.W.col(jj) = w;
    fit.fn.bias[jj] = b;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rows.dot(i, w) + b;
      correct += ((s >= 0.0 ? 1.0 : -1.0) == y[i]) ? 1 : 0;
    }
    fit.train_accuracy[j] = n ? static_cast<double>(correct) / static_cast<double>(n) : 1.0;
  }
  return fit;
}

}  // namespace

HashFunctionFit train_hash_fn(const Eigen::MatrixXd& features, const CodeMatrix& codes,
                              const SvmParams& params) {
  return train_impl(DenseRows{features}, codes, params);
}

HashFunctionFit train_hash_fn(std::span<const SparseDocVector> features, std::size_t dim,
                              const CodeMatrix& codes, const SvmParams& params) {
  for (const auto& x : features) {
    if (!x.entries().empty() && x.entries().back().term >= dim) {
      throw ShapeMismatch("train_hash_fn: term id outside the feature dimension");
    }
  }
  return train_impl(SparseRows{features, dim}, codes, params);
}

FeaCodes fit_codes_fea(const ThetaTable& thetas, std::span<const TagSet> tags,
                       const SelectionResult& selection, std::size_t l,
                       const AffinityParams& affinity, const EigenmapOptions& eigen) {
  if (thetas.size() != selection.M()) throw ShapeMismatch("fit_codes_fea: one theta column per selected model");
  if (l == 0) throw InvalidArgument("fit_codes_fea: l must be positive");
  FeaCodes out;
  out.omegas = fuse_table(thetas, selection.mu_hat);
  out.graph = build_affinity(out.omegas, tags, affinity);
  out.embedding = laplacian_eigenmap(out.graph, l, eigen);
  out.codes = median_binarize(out.embedding);
  return out;
}

FeaCodes fit_codes_fea(const Corpus& corpus, const SelectionResult& selection,
                       const TopicModelBank& bank, std::size_t l, const AffinityParams& affinity,
                       const EigenmapOptions& eigen) {
  auto models = bank.subset(selection.Ks);
  auto thetas = infer_table(models, corpus);
  return fit_codes_fea(thetas, corpus.tags, selection, l, affinity, eigen);
}

int FeaModel::K_tilde() const { return std::accumulate(Ks.begin(), Ks.end(), 0); }

HashCode FeaModel::encode(std::span<const TopicModel* const> models, const SparseDocVector& x) const {
  if (input == HashInput::kKeywords) {
    std::vector<SparseDocVector::Entry> e;
    for (const auto& t : x.entries()) {
      if (t.term < idf.size() && idf[t.term] > 0.0) e.push_back({t.term, t.weight * idf[t.term]});
    }
    return fn.encode(SparseDocVector::from_entries(std::move(e)));
  }
  if (models.size() != Ks.size()) throw ShapeMismatch("FeaModel::encode: one topic model per granularity");
  for (std::size_t m = 0; m < Ks.size(); ++m) {
    if (models[m]->num_topics() != Ks[m]) throw ShapeMismatch("FeaModel::encode: topic model order differs from Ks");
  }
  auto thetas = infer_multi(models, x, infer_salt);
  return fn.encode(fuse(thetas, mu_hat));
}

HashCode encode_fea(const FeaModel& model, std::span<const TopicModel* const> models,
                    const SparseDocVector& x) {
  return model.encode(models, x);
}

namespace {
constexpr char kFeaMagic[9] = "MTHFEA01";
constexpr std::uint32_t kVariantFea = 1;

void write_string(std::ostream& os, const std::string& s) {
  io::write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  const auto len = io::read_u32(is);
  if (len > (1u << 20)) throw IoError("implausible string length in model file");
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw IoError("unexpected end of file");
  return s;
}
}  // namespace

void FeaModel::save(const std::filesystem::path& path) const {
  if (mu_hat.size() != Ks.size()) throw ShapeMismatch("FeaModel::save: one weight per granularity");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  io::write_magic(os, kFeaMagic);
  io::write_u32(os, kVariantFea);
  io::write_u32(os, static_cast<std::uint32_t>(l()));
  io::write_u32(os, static_cast<std::uint32_t>(K_tilde()));
  io::write_u32(os, static_cast<std::uint32_t>(Ks.size()));
  for (int K : Ks) io::write_u32(os, static_cast<std::uint32_t>(K));
  io::write_f64s(os, mu_hat.data(), mu_hat.size());
  io::write_u32(os, static_cast<std::uint32_t>(input));
  io::write_u64(os, infer_salt);
  io::write_u32(os, static_cast<std::uint32_t>(fn.input_dim()));
  for (Eigen::Index i = 0; i < fn.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < fn.W.cols(); ++j) io::write_f64(os, fn.W(i, j));
  }
  io::write_f64s(os, fn.bias.data(), static_cast<std::size_t>(fn.bias.size()));
  io::write_u32(os, static_cast<std::uint32_t>(idf.size()));
  io::write_f64s(os, idf.data(), idf.size());
  io::write_u32(os, static_cast<std::uint32_t>(topic_files.size()));
  for (const auto& f : topic_files) write_string(os, f);
  if (!os) throw IoError("failed writing " + path.string());
}

FeaModel FeaModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file " + path.string());
  io::expect_magic(is, kFeaMagic, "feature-level hash model");
  if (io::read_u32(is) != kVariantFea) throw IoError("unexpected model variant in " + path.string());
  FeaModel m;
  const auto l = io::read_u32(is);
  const auto k_tilde = io::read_u32(is);
  const auto M = io::read_u32(is);
  if (M > 1024) throw IoError("implausible model count in " + path.string());
  m.Ks.resize(M);
  for (auto& K : m.Ks) K = static_cast<int>(io::read_u32(is));
  m.mu_hat.resize(M);
  io::read_f64s(is, m.mu_hat.data(), M);
  m.input = static_cast<HashInput>(io::read_u32(is));
  m.infer_salt = io::read_u64(is);
  const auto dim = io::read_u32(is);
  if (m.input == HashInput::kTopics && dim != k_tilde) throw IoError("hash model dimension does not match K_tilde");
  m.fn.W.resize(dim, l);
  for (Eigen::Index i = 0; i < m.fn.W.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.fn.W.cols(); ++j) m.fn.W(i, j) = io::read_f64(is);
  }
  m.fn.bias.resize(l);
  io::read_f64s(is, m.fn.bias.data(), l);
  m.idf.resize(io::read_u32(is));
  io::read_f64s(is, m.idf.data(), m.idf.size());
  const auto files = io::read_u32(is);
  for (std::uint32_t i = 0; i < files; ++i) m.topic_files.push_back(read_string(is));
  return m;
}

}  // namespace mthash
