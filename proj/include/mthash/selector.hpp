#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mthash/corpus.hpp"
#include "mthash/topics.hpp"

namespace mthash {

/// 1/2 * sum_k [p_k ln(p_k/q_k) + q_k ln(q_k/p_k)], natural log. Inputs must be
/// strictly positive and of equal length.
double symmetric_kl(std::span<const double> p, std::span<const double> q);

inline double symmetric_kl(const TopicDistribution& p, const TopicDistribution& q) {
  return symmetric_kl(std::span<const double>(p.theta), std::span<const double>(q.theta));
}

/// thetas[model][doc] for every model of a bank over every corpus document.
using ThetaTable = std::vector<std::vector<TopicDistribution>>;

ThetaTable infer_table(std::span<const TopicModel* const> models, const Corpus& corpus,
                       std::uint64_t salt = 0);
ThetaTable infer_table(const TopicModelBank& bank, const Corpus& corpus, std::uint64_t salt = 0);

struct ReliefParams {
  std::size_t per_tag_sample = 100;  // m: sampled documents per tag
  std::size_t neighbors = 10;        // k: hits and misses per sampled document
  std::uint64_t seed = 1;
  KeywordWeighting weighting = KeywordWeighting::kTfidf;
};

struct GranularityWeights {
  std::vector<int> Ks;
  std::vector<double> mu;
  std::size_t sample_size = 0;
  std::size_t neighbors = 0;

  double weight(int K) const;
};

/// Relief-style granularity scoring: for each sampled document, the mean
/// symmetric KL to its k nearest misses minus that to its k nearest hits,
/// accumulated per candidate model. Neighbours are searched by keyword cosine
/// over the whole corpus.
GranularityWeights relief_weights(const Corpus& corpus, const TopicModelBank& bank,
                                  const ReliefParams& params);

/// Same computation on precomputed keyword vectors and thetas
/// (thetas[i][doc] belongs to candidate Ks[i]).
GranularityWeights relief_weights(std::span<const SparseDocVector> keyword_space,
                                  std::span<const TagSet> tags, std::span<const int> Ks,
                                  const ThetaTable& thetas, const ReliefParams& params);

struct SelectionResult {
  std::vector<int> Ks;          // chosen granularities, weight descending
  std::vector<double> mu;       // raw weights of the chosen models
  std::vector<double> mu_hat;   // mu / min(mu); all ones when min(mu) <= 0
  std::vector<int> candidate_Ks;
  std::vector<double> candidate_mu;
  bool nonpositive_weights = false;

  std::size_t M() const noexcept { return Ks.size(); }
  int K_tilde() const;

  void save(const std::filesystem::path& path) const;
  static SelectionResult load(const std::filesystem::path& path);
};

/// Greedy top-M by weight; ties go to the smaller K.
SelectionResult select_top(const GranularityWeights& weights, std::size_t M);

/// A selection of fixed granularities with the given (or unit) weights.
SelectionResult fixed_selection(std::vector<int> Ks, std::vector<double> mu_hat = {});

}  // namespace mthash
