#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mthash/affinity.hpp"
#include "mthash/corpus.hpp"
#include "mthash/linear_hash.hpp"
#include "mthash/selector.hpp"
#include "mthash/spectral.hpp"
#include "mthash/topics.hpp"

namespace mthash {

/// [mu_hat_1 theta_1 | ... | mu_hat_M theta_M].
Eigen::VectorXd fuse(std::span<const TopicDistribution> thetas, std::span<const double> mu_hat);

/// Row i is the fused vector of document i; thetas[m][i] belongs to the m-th
/// selected model.
Eigen::MatrixXd fuse_table(const ThetaTable& thetas, std::span<const double> mu_hat);

struct SvmParams {
  double C = 1.0;
  int max_epochs = 300;
  double tolerance = 1e-3;  // projected-gradient spread for early stop
  bool bias = true;         // false gives the strict sgn(W^T x) form
  std::uint64_t seed = 7;   // coordinate visiting order
};

struct HashFunctionFit {
  LinearHashFunction fn;
  std::vector<double> train_accuracy;      // per bit
  std::vector<std::size_t> constant_bits;  // bits whose training labels never change

  double mean_accuracy() const;
};

/// One L2-regularised hinge-loss linear classifier per bit, fitted by dual
/// coordinate descent on the labels codes(:, j).
HashFunctionFit train_hash_fn(const Eigen::MatrixXd& features, const CodeMatrix& codes,
                              const SvmParams& params = {});
/// Same on sparse rows of dimension `dim`.
HashFunctionFit train_hash_fn(std::span<const SparseDocVector> features, std::size_t dim,
                              const CodeMatrix& codes, const SvmParams& params = {});

struct FeaCodes {
  Eigen::MatrixXd omegas;  // n x K_tilde
  AffinityGraph graph;
  Embedding embedding;
  CodeMatrix codes;
};

/// Fused features, tag-aware affinity over them, Laplacian eigenmap and
/// median thresholding. `thetas` follows the order of `selection.Ks`.
FeaCodes fit_codes_fea(const ThetaTable& thetas, std::span<const TagSet> tags,
                       const SelectionResult& selection, std::size_t l,
                       const AffinityParams& affinity, const EigenmapOptions& eigen = {});
FeaCodes fit_codes_fea(const Corpus& corpus, const SelectionResult& selection,
                       const TopicModelBank& bank, std::size_t l, const AffinityParams& affinity,
                       const EigenmapOptions& eigen = {});

enum class HashInput : std::uint32_t { kTopics = 0, kKeywords = 1 };

/// Query-time model of the feature-level variant.
struct FeaModel {
  std::vector<int> Ks;
  std::vector<double> mu_hat;
  LinearHashFunction fn;
  HashInput input = HashInput::kTopics;
  std::vector<double> idf;  // only for HashInput::kKeywords
  std::uint64_t infer_salt = 0;
  std::vector<std::string> topic_files;

  std::size_t l() const noexcept { return fn.l(); }
  int K_tilde() const;

  /// Infer thetas with `models` (ordered as Ks), fuse, apply the hash function.
  HashCode encode(std::span<const TopicModel* const> models, const SparseDocVector& x) const;
  HashCode encode_fused(const Eigen::VectorXd& omega) const { return fn.encode(omega); }

  /// Header (variant, l, K_tilde, Ks, mu_hat), W row-major and bias as
  /// little-endian f64, then the topic model file references.
  void save(const std::filesystem::path& path) const;
  static FeaModel load(const std::filesystem::path& path);
};

HashCode encode_fea(const FeaModel& model, std::span<const TopicModel* const> models,
                    const SparseDocVector& x);

}  // namespace mthash
