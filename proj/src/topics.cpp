#include "mthash/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "mthash/binary_io.hpp"
#include "mthash/error.hpp"
#include "mthash/log.hpp"

namespace mthash {

namespace {

constexpr char kTopicMagic[9] = "MTHLDA01";

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<TermId> expand_tokens(const SparseDocVector& x, std::size_t vocab_size) {
  std::vector<TermId> tokens;
  for (const auto& e : x.entries()) {
    if (e.term >= vocab_size) continue;
    auto reps = std::max<long>(1, std::lround(e.weight));
    tokens.insert(tokens.end(), static_cast<std::size_t>(reps), e.term);
  }
  return tokens;
}

int sample_index(std::span<const double> cumulative, double u) {
  double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) --it;
  return static_cast<int>(it - cumulative.begin());
}

}  // namespace

TopicModel::TopicModel(int num_topics, std::size_t vocab_size, const LdaConfig& config,
                       std::vector<double> phi)
    : K_(num_topics),
      d_(vocab_size),
      alpha_(config.alpha),
      beta_(config.beta),
      seed_(config.seed),
      train_iters_(config.iters),
      infer_iters_(config.infer_iters),
      average_last_(config.average_last),
      phi_(std::move(phi)) {
  if (K_ < 2) throw InvalidArgument("topic model needs K >= 2");
  if (infer_iters_ < 1) throw InvalidArgument("inference needs at least one Gibbs sweep");
  if (phi_.size() != static_cast<std::size_t>(K_) * d_) throw ShapeMismatch("phi has wrong size");
  build_word_major();
}

void TopicModel::build_word_major() {
  word_major_.assign(phi_.size(), 0.0);
  for (int k = 0; k < K_; ++k) {
    for (std::size_t w = 0; w < d_; ++w) word_major_[w * K_ + k] = phi_[k * d_ + w];
  }
}

void TopicModel::set_infer_iters(int r) {
  if (r < 1) throw InvalidArgument("inference needs at least one Gibbs sweep");
  infer_iters_ = r;
}

void TopicModel::set_average_last(int count) {
  if (count < 1) throw InvalidArgument("average_last must be >= 1");
  average_last_ = count;
}

TopicDistribution TopicModel::infer(const SparseDocVector& x, std::uint64_t salt) const {
  TopicDistribution out;
  out.theta.assign(K_, 1.0 / K_);
  auto tokens = expand_tokens(x, d_);
  if (tokens.empty()) return out;

  std::mt19937_64 rng(seed_ ^ (0x9E3779B97F4A7C15ULL * (salt + 1)));
  std::vector<int> z(tokens.size());
  std::vector<double> counts(K_, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    z[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(K_));
    counts[z[i]] += 1.0;
  }

  const int averaged = std::min(average_last_, infer_iters_);
  std::vector<double> accum(K_, 0.0);
  std::vector<double> cumulative(K_);
  for (int sweep = 0; sweep < infer_iters_; ++sweep) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      counts[z[i]] -= 1.0;
      const double* row = &word_major_[static_cast<std::size_t>(tokens[i]) * K_];
      double run = 0.0;
      for (int k = 0; k < K_; ++k) {
        run += row[k] * (counts[k] + alpha_);
        cumulative[k] = run;
      }
      z[i] = sample_index(cumulative, uniform01(rng));
      counts[z[i]] += 1.0;
    }
    if (sweep >= infer_iters_ - averaged) {
      for (int k = 0; k < K_; ++k) accum[k] += counts[k];
    }
  }
  const double len = static_cast<double>(tokens.size());
  const double denom = len + K_ * alpha_;
  for (int k = 0; k < K_; ++k) out.theta[k] = (accum[k] / averaged + alpha_) / denom;
  return out;
}

TopicModel train_lda(const Corpus& corpus, int num_topics, const LdaConfig& config) {
  if (corpus.n() == 0) throw EmptyCorpusError("cannot train a topic model on an empty corpus");
  if (num_topics < 2) throw InvalidArgument("topic model needs K >= 2");
  if (config.iters < 1) throw InvalidArgument("training needs at least one Gibbs sweep");
  if (config.alpha <= 0.0 || config.beta <= 0.0) {
    throw InvalidArgument("Dirichlet hyperparameters must be positive");
  }
  const std::size_t d = corpus.d();
  const int K = num_topics;
  if (static_cast<std::size_t>(K) > d) {
    warn("K=" + std::to_string(K) + " exceeds vocabulary size " + std::to_string(d));
  }

  std::vector<std::vector<TermId>> docs;
  docs.reserve(corpus.n());
  for (const auto& doc : corpus.docs) {
    auto tokens = expand_tokens(doc, d);
    if (!tokens.empty()) docs.push_back(std::move(tokens));
  }

  std::mt19937_64 rng(config.seed);
  const double alpha = config.alpha;
  const double beta = config.beta;
  const double vbeta = static_cast<double>(d) * beta;

  std::vector<std::vector<int>> z(docs.size());
  std::vector<std::vector<int>> doc_topic(docs.size(), std::vector<int>(K, 0));
  std::vector<int> word_topic(d * K, 0);  // w-major
  std::vector<int> topic_total(K, 0);
  for (std::size_t m = 0; m < docs.size(); ++m) {
    z[m].resize(docs[m].size());
    for (std::size_t i = 0; i < docs[m].size(); ++i) {
      int k = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
      z[m][i] = k;
      ++doc_topic[m][k];
      ++word_topic[docs[m][i] * K + k];
      ++topic_total[k];
    }
  }

  auto log_likelihood = [&] {
    const double lg_beta = std::lgamma(beta);
    double ll = K * std::lgamma(vbeta);
    for (int k = 0; k < K; ++k) ll -= std::lgamma(topic_total[k] + vbeta);
    for (int c : word_topic) {
      if (c > 0) ll += std::lgamma(c + beta) - lg_beta;
    }
    return ll;
  };

  std::vector<double> inv_total(K);
  for (int k = 0; k < K; ++k) inv_total[k] = 1.0 / (topic_total[k] + vbeta);

  std::vector<double> loglik;
  std::vector<double> cumulative(K);
  for (int sweep = 0; sweep < config.iters; ++sweep) {
    for (std::size_t m = 0; m < docs.size(); ++m) {
      auto& dt = doc_topic[m];
      for (std::size_t i = 0; i < docs[m].size(); ++i) {
        const TermId w = docs[m][i];
        int k = z[m][i];
        --dt[k];
        --word_topic[w * K + k];
        --topic_total[k];
        inv_total[k] = 1.0 / (topic_total[k] + vbeta);
        const int* wt = &word_topic[static_cast<std::size_t>(w) * K];
        double run = 0.0;
        for (int t = 0; t < K; ++t) {
          run += (dt[t] + alpha) * (wt[t] + beta) * inv_total[t];
          cumulative[t] = run;
        }
        k = sample_index(cumulative, uniform01(rng));
        z[m][i] = k;
        ++dt[k];
        ++word_topic[w * K + k];
        ++topic_total[k];
        inv_total[k] = 1.0 / (topic_total[k] + vbeta);
      }
    }
    if (config.track_log_likelihood) loglik.push_back(log_likelihood());
  }

  std::vector<double> phi(static_cast<std::size_t>(K) * d);
  for (int k = 0; k < K; ++k) {
    const double denom = topic_total[k] + vbeta;
    for (std::size_t w = 0; w < d; ++w) phi[k * d + w] = (word_topic[w * K + k] + beta) / denom;
  }
  TopicModel model(K, d, config, std::move(phi));
  model.loglik_ = std::move(loglik);
  return model;
}

void TopicModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  io::write_magic(out, kTopicMagic);
  io::write_u32(out, static_cast<std::uint32_t>(K_));
  io::write_f64(out, alpha_);
  io::write_f64(out, beta_);
  io::write_u32(out, static_cast<std::uint32_t>(d_));
  io::write_u64(out, seed_);
  io::write_u32(out, static_cast<std::uint32_t>(train_iters_));
  io::write_u32(out, static_cast<std::uint32_t>(infer_iters_));
  io::write_u32(out, static_cast<std::uint32_t>(average_last_));
  io::write_f64s(out, phi_.data(), phi_.size());
  if (!out) throw IoError("write failed for " + path.string());
}

TopicModel TopicModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open topic model " + path.string());
  io::expect_magic(in, kTopicMagic, "topic model");
  LdaConfig cfg;
  int K = static_cast<int>(io::read_u32(in));
  cfg.alpha = io::read_f64(in);
  cfg.beta = io::read_f64(in);
  std::size_t d = io::read_u32(in);
  cfg.seed = io::read_u64(in);
  cfg.iters = static_cast<int>(io::read_u32(in));
  cfg.infer_iters = static_cast<int>(io::read_u32(in));
  cfg.average_last = static_cast<int>(io::read_u32(in));
  std::vector<double> phi(static_cast<std::size_t>(K) * d);
  io::read_f64s(in, phi.data(), phi.size());
  return TopicModel(K, d, cfg, std::move(phi));
}

std::vector<TermId> TopicModel::top_words(int k, std::size_t count) const {
  std::vector<TermId> ids(d_);
  std::iota(ids.begin(), ids.end(), 0);
  count = std::min(count, d_);
  std::partial_sort(ids.begin(), ids.begin() + count, ids.end(), [&](TermId a, TermId b) {
    double pa = phi(k, a), pb = phi(k, b);
    return pa != pb ? pa > pb : a < b;
  });
  ids.resize(count);
  return ids;
}

void TopicModel::write_top_words(const std::filesystem::path& path, const Vocabulary& vocab,
                                 std::size_t count) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (int k = 0; k < K_; ++k) {
    out << "topic " << k << ':';
    for (auto w : top_words(k, count)) {
      out << ' ' << (w < vocab.size() ? vocab.term(w) : std::to_string(w));
    }
    out << '\n';
  }
}

TopicModelBank::TopicModelBank(std::vector<TopicModel> models) : models_(std::move(models)) {
  std::sort(models_.begin(), models_.end(),
            [](const TopicModel& a, const TopicModel& b) { return a.num_topics() < b.num_topics(); });
  for (std::size_t i = 1; i < models_.size(); ++i) {
    if (models_[i].num_topics() == models_[i - 1].num_topics()) {
      throw InvalidArgument("topic model bank has duplicate K=" +
                            std::to_string(models_[i].num_topics()));
    }
  }
}

const TopicModel& TopicModelBank::by_k(int K) const {
  for (const auto& m : models_) {
    if (m.num_topics() == K) return m;
  }
  throw InvalidArgument("no topic model with K=" + std::to_string(K));
}

std::vector<int> TopicModelBank::ks() const {
  std::vector<int> out;
  for (const auto& m : models_) out.push_back(m.num_topics());
  return out;
}

std::vector<const TopicModel*> TopicModelBank::subset(std::span<const int> Ks) const {
  std::vector<const TopicModel*> out;
  for (int K : Ks) out.push_back(&by_k(K));
  return out;
}

TopicModelBank train_bank(const Corpus& corpus, std::span<const int> Ks, const LdaConfig& config) {
  std::set<int> seen;
  for (int K : Ks) {
    if (!seen.insert(K).second) throw InvalidArgument("duplicate K=" + std::to_string(K));
    if (K < 2) throw InvalidArgument("topic model needs K >= 2");
  }
  std::vector<std::future<TopicModel>> jobs;
  for (int K : Ks) {
    LdaConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(K);
    jobs.push_back(std::async(std::launch::async,
                              [&corpus, K, cfg] { return train_lda(corpus, K, cfg); }));
  }
  std::vector<TopicModel> models;
  for (auto& j : jobs) models.push_back(j.get());
  return TopicModelBank(std::move(models));
}

std::vector<TopicDistribution> infer_multi(std::span<const TopicModel* const> models,
                                           const SparseDocVector& x, std::uint64_t salt) {
  std::vector<TopicDistribution> out;
  out.reserve(models.size());
  for (const auto* m : models) out.push_back(m->infer(x, salt));
  return out;
}

}  // namespace mthash
