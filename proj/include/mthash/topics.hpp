#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mthash/corpus.hpp"

namespace mthash {

struct LdaConfig {
  double alpha = 0.5;
  double beta = 0.01;
  int iters = 1000;
  int infer_iters = 20;
  // Query-time theta averages assignment counts over this many final sweeps;
  // 1 gives the single-sample estimate.
  int average_last = 5;
  std::uint64_t seed = 1;
  bool track_log_likelihood = false;
};

/// Length-K probability vector p(z | x). Always strictly positive.
struct TopicDistribution {
  std::vector<double> theta;

  std::size_t size() const noexcept { return theta.size(); }
  double operator[](std::size_t k) const { return theta[k]; }
  bool operator==(const TopicDistribution&) const = default;
};

/// LDA topic-word model estimated by collapsed Gibbs sampling.
class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(int num_topics, std::size_t vocab_size, const LdaConfig& config,
             std::vector<double> phi);

  int num_topics() const noexcept { return K_; }
  std::size_t vocab_size() const noexcept { return d_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int train_iters() const noexcept { return train_iters_; }
  int infer_iters() const noexcept { return infer_iters_; }
  int average_last() const noexcept { return average_last_; }

  /// phi[k][w] = p(w | z = k).
  double phi(int k, TermId w) const { return phi_[static_cast<std::size_t>(k) * d_ + w]; }
  std::span<const double> phi_matrix() const noexcept { return phi_; }

  /// Per-sweep joint log-likelihood log p(w | z), recorded only when
  /// LdaConfig::track_log_likelihood was set. Not persisted.
  std::span<const double> log_likelihood_trace() const noexcept { return loglik_; }

  /// Gibbs inference with phi fixed. Deterministic for a given (x, salt);
  /// documents with no in-vocabulary tokens get the uniform distribution.
  TopicDistribution infer(const SparseDocVector& x, std::uint64_t salt = 0) const;

  void set_infer_iters(int r);
  void set_average_last(int count);

  void save(const std::filesystem::path& path) const;
  static TopicModel load(const std::filesystem::path& path);

  /// Human-readable sidecar: the `count` most probable words per topic.
  void write_top_words(const std::filesystem::path& path, const Vocabulary& vocab,
                       std::size_t count = 10) const;
  std::vector<TermId> top_words(int k, std::size_t count) const;

 private:
  friend TopicModel train_lda(const Corpus&, int, const LdaConfig&);

  void build_word_major();

  int K_ = 0;
  std::size_t d_ = 0;
  double alpha_ = 0.5;
  double beta_ = 0.01;
  std::uint64_t seed_ = 0;
  int train_iters_ = 0;
  int infer_iters_ = 20;
  int average_last_ = 5;
  std::vector<double> phi_;         // K x d, row-major
  std::vector<double> word_major_;  // d x K copy for inference
  std::vector<double> loglik_;
};

/// Collapsed Gibbs LDA. Document weights are taken as integer term counts.
TopicModel train_lda(const Corpus& corpus, int num_topics, const LdaConfig& config);

/// Models at distinct granularities, sorted by increasing K.
class TopicModelBank {
 public:
  TopicModelBank() = default;
  explicit TopicModelBank(std::vector<TopicModel> models);

  std::span<const TopicModel> models() const noexcept { return models_; }
  std::size_t size() const noexcept { return models_.size(); }
  const TopicModel& at(std::size_t i) const { return models_.at(i); }
  const TopicModel& by_k(int K) const;
  std::vector<int> ks() const;

  /// Pointers into the bank for the requested K values, in request order.
  std::vector<const TopicModel*> subset(std::span<const int> Ks) const;

 private:
  std::vector<TopicModel> models_;
};

/// Trains one model per K (seed = config.seed + K). Duplicate Ks throw.
TopicModelBank train_bank(const Corpus& corpus, std::span<const int> Ks, const LdaConfig& config);

/// Per-model inference, order preserved.
std::vector<TopicDistribution> infer_multi(std::span<const TopicModel* const> models,
                                           const SparseDocVector& x, std::uint64_t salt = 0);

}  // namespace mthash
