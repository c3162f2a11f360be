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
#include "mthash/hash_code.hpp"
#include "mthash/selector.hpp"
#include "mthash/spectral.hpp"
#include "mthash/topics.hpp"

namespace mthash {

/// One granularity treated as a view: its topic features and graph.
struct View {
  int K = 0;
  Eigen::MatrixXd X;       // n x K thetas
  SparseMatrix laplacian;  // symmetric normalised
};

struct MultiViewModel {
  std::vector<View> views;
  std::vector<Eigen::MatrixXd> W;  // per view, K_k x l
  Eigen::VectorXd alpha;           // on the simplex
  double C1 = 1.0;
  double C2 = 1.0;
  std::vector<double> objective_trace;  // initial value, then one per round
  bool converged = false;

  std::size_t M() const noexcept { return views.size(); }
  std::size_t n() const;
  /// sum_k alpha_k X^(k) W^(k), n x l.
  Eigen::MatrixXd predict() const;
};

/// C1 tr(Y^T sum_k L^(k) Y) + C2 |Y - sum_k alpha_k X^(k) W^(k)|_F^2 + sum_k |W^(k)|_F^2.
double multiview_objective(const MultiViewModel& model, const Eigen::MatrixXd& Y);

struct DecParams {
  double C1 = 1.0;
  double C2 = 1.0;
  int max_iters = 30;
  double tol = 1e-6;
  int alpha_steps = 100;
  int refine_steps = 20;  // majorize-minimize passes per Y-step
};

struct DecFit {
  MultiViewModel model;
  Eigen::MatrixXd Y;  // relaxed codes: Y^T 1 = 0, Y^T Y = I
  CodeMatrix codes;
  Eigen::VectorXd thresholds;  // per-bit median of training predictions
};

/// Alternating minimisation over W, alpha and Y on prebuilt views.
DecFit fit_codes_dec(std::vector<View> views, std::size_t l, const DecParams& params);

/// Builds one tag-aware kNN graph per selected granularity, then fits.
/// `thetas` follows the order of `selection.Ks`.
DecFit fit_codes_dec(const ThetaTable& thetas, std::span<const TagSet> tags,
                     const SelectionResult& selection, std::size_t l,
                     const AffinityParams& affinity, const DecParams& params);
DecFit fit_codes_dec(const Corpus& corpus, const SelectionResult& selection,
                     const TopicModelBank& bank, std::size_t l, const AffinityParams& affinity,
                     const DecParams& params);

/// Query-time model of the decision-level variant.
struct DecModel {
  std::vector<int> Ks;
  Eigen::VectorXd alpha;
  double C1 = 1.0;
  double C2 = 1.0;
  std::vector<Eigen::MatrixXd> W;  // per view, K_k x l
  Eigen::VectorXd thresholds;
  std::uint64_t infer_salt = 0;
  std::vector<std::string> topic_files;

  static DecModel from_fit(const DecFit& fit);

  std::size_t l() const noexcept { return static_cast<std::size_t>(thresholds.size()); }

  /// sgn(sum_k alpha_k W^(k)^T theta_k - thresholds), sgn(0) = +1.
  HashCode encode_views(std::span<const TopicDistribution> thetas) const;
  HashCode encode(std::span<const TopicModel* const> models, const SparseDocVector& x) const;

  /// Header (variant, l, M, Ks, alpha, C1, C2), per-view W row-major, the
  /// thresholds, then topic model file references.
  void save(const std::filesystem::path& path) const;
  static DecModel load(const std::filesystem::path& path);
};

HashCode encode_dec(const DecModel& model, std::span<const TopicModel* const> models,
                    const SparseDocVector& x);

}  // namespace mthash
