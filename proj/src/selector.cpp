#include "mthash/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "mthash/error.hpp"
#include "mthash/log.hpp"

namespace mthash {

double symmetric_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeMismatch("symmetric_kl: length mismatch");
  // p ln(p/q) + q ln(q/p) = (p - q) ln(p/q); every term is non-negative, and
  // log1p keeps ln(p/q) accurate when p and q are close.
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0 && q[k] > 0.0)) {
      throw InvalidArgument("symmetric_kl: distributions must be strictly positive");
    }
    // Ordered by value so the result is exactly symmetric.
    const double lo = std::min(p[k], q[k]);
    const double diff = std::max(p[k], q[k]) - lo;
    if (diff == 0.0) continue;
    sum += diff * std::log1p(diff / lo);
  }
  return 0.5 * sum;
}

ThetaTable infer_table(std::span<const TopicModel* const> models, const Corpus& corpus,
                       std::uint64_t salt) {
  ThetaTable table(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    table[i].reserve(corpus.n());
    for (const auto& doc : corpus.docs) table[i].push_back(models[i]->infer(doc, salt));
  }
  return table;
}

ThetaTable infer_table(const TopicModelBank& bank, const Corpus& corpus, std::uint64_t salt) {
  std::vector<const TopicModel*> models;
  for (const auto& m : bank.models()) models.push_back(&m);
  return infer_table(models, corpus, salt);
}

double GranularityWeights::weight(int K) const {
  for (std::size_t i = 0; i < Ks.size(); ++i) {
    if (Ks[i] == K) return mu[i];
  }
  throw InvalidArgument("no weight for K=" + std::to_string(K));
}

namespace {

struct Neighbor {
  double sim;
  std::size_t id;
};

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sim != b.sim ? a.sim > b.sim : a.id < b.id;
}

void keep_top(std::vector<Neighbor>& v, std::size_t k) {
  if (v.size() > k) {
    std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), closer);
    v.resize(k);
  } else {
    std::sort(v.begin(), v.end(), closer);
  }
}

std::vector<std::size_t> stratified_sample(std::span<const TagSet> tags, std::size_t per_tag,
                                           std::uint64_t seed) {
  std::map<TagId, std::vector<std::size_t>> by_tag;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    for (auto t : tags[i].ids()) by_tag[t].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> sample;
  std::vector<char> taken(tags.size(), 0);
  for (auto& [tag, docs] : by_tag) {
    std::shuffle(docs.begin(), docs.end(), rng);
    std::size_t added = 0;
    for (auto doc : docs) {
      if (added == per_tag) break;
      ++added;
      if (!taken[doc]) {
        taken[doc] = 1;
        sample.push_back(doc);
      }
    }
  }
  return sample;
}

}  // namespace

GranularityWeights relief_weights(std::span<const SparseDocVector> keyword_space,
                                  std::span<const TagSet> tags, std::span<const int> Ks,
                                  const ThetaTable& thetas, const ReliefParams& params) {
  const std::size_t n = keyword_space.size();
  if (tags.size() != n) throw ShapeMismatch("relief_weights: tags and documents differ in length");
  if (thetas.size() != Ks.size()) throw ShapeMismatch("relief_weights: one theta set per model");
  for (const auto& t : thetas) {
    if (t.size() != n) throw ShapeMismatch("relief_weights: thetas must cover every document");
  }
  if (params.neighbors == 0) throw InvalidArgument("relief_weights: k must be positive");
  if (std::all_of(tags.begin(), tags.end(), [](const TagSet& t) { return t.empty(); })) {
    throw InvalidArgument("granularity selection requires tagged documents");
  }

  auto sample = stratified_sample(tags, params.per_tag_sample, params.seed);
  std::vector<std::vector<double>> contributions(sample.size(), std::vector<double>(Ks.size(), 0.0));

  std::vector<Neighbor> hits, misses;
  for (std::size_t s = 0; s < sample.size(); ++s) {
    const std::size_t x = sample[s];
    hits.clear();
    misses.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == x) continue;
      Neighbor nb{cosine(keyword_space[x], keyword_space[j]), j};
      (tags[x].intersects(tags[j]) ? hits : misses).push_back(nb);
    }
    keep_top(hits, params.neighbors);
    keep_top(misses, params.neighbors);
    for (std::size_t i = 0; i < Ks.size(); ++i) {
      const auto& theta = thetas[i];
      double miss_term = 0.0, hit_term = 0.0;
      for (const auto& nb : misses) miss_term += symmetric_kl(theta[x], theta[nb.id]);
      for (const auto& nb : hits) hit_term += symmetric_kl(theta[x], theta[nb.id]);
      if (!misses.empty()) miss_term /= static_cast<double>(misses.size());
      if (!hits.empty()) hit_term /= static_cast<double>(hits.size());
      contributions[s][i] = miss_term - hit_term;
    }
  }

  GranularityWeights w;
  w.Ks.assign(Ks.begin(), Ks.end());
  w.mu.assign(Ks.size(), 0.0);
  w.sample_size = sample.size();
  w.neighbors = params.neighbors;
  for (const auto& c : contributions) {
    for (std::size_t i = 0; i < Ks.size(); ++i) w.mu[i] += c[i];
  }
  return w;
}

GranularityWeights relief_weights(const Corpus& corpus, const TopicModelBank& bank,
                                  const ReliefParams& params) {
  if (!corpus.has_tags()) throw InvalidArgument("granularity selection requires tagged documents");
  auto keywords = keyword_vectors(corpus, params.weighting);
  auto thetas = infer_table(bank, corpus);
  auto Ks = bank.ks();
  return relief_weights(keywords, corpus.tags, Ks, thetas, params);
}

int SelectionResult::K_tilde() const { return std::accumulate(Ks.begin(), Ks.end(), 0); }

SelectionResult select_top(const GranularityWeights& weights, std::size_t M) {
  const std::size_t N = weights.Ks.size();
  if (M > N) {
    throw InvalidArgument("cannot select " + std::to_string(M) + " of " + std::to_string(N) +
                          " candidate granularities");
  }
  if (M == 0) throw InvalidArgument("must select at least one granularity");
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (weights.mu[a] != weights.mu[b]) return weights.mu[a] > weights.mu[b];
    return weights.Ks[a] < weights.Ks[b];
  });

  SelectionResult r;
  r.candidate_Ks = weights.Ks;
  r.candidate_mu = weights.mu;
  for (std::size_t i = 0; i < M; ++i) {
    r.Ks.push_back(weights.Ks[order[i]]);
    r.mu.push_back(weights.mu[order[i]]);
  }
  const double lowest = *std::min_element(r.mu.begin(), r.mu.end());
  if (lowest > 0.0 && std::isfinite(lowest)) {
    for (double m : r.mu) r.mu_hat.push_back(m / lowest);
  } else {
    r.nonpositive_weights = true;
    r.mu_hat.assign(M, 1.0);
    warn("selected granularity weights are not all positive; using unit fusion weights");
  }
  return r;
}

SelectionResult fixed_selection(std::vector<int> Ks, std::vector<double> mu_hat) {
  if (Ks.empty()) throw InvalidArgument("selection needs at least one granularity");
  if (mu_hat.empty()) mu_hat.assign(Ks.size(), 1.0);
  if (mu_hat.size() != Ks.size()) throw ShapeMismatch("one weight per granularity");
  SelectionResult r;
  r.Ks = Ks;
  r.mu = mu_hat;
  r.mu_hat = std::move(mu_hat);
  r.candidate_Ks = std::move(Ks);
  r.candidate_mu = r.mu;
  return r;
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

template <typename T>
std::vector<T> split(const std::string& s) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v)) throw IoError("bad list element '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

void SelectionResult::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "chosen_ks=" << join(Ks) << '\n'
      << "mu=" << join(mu) << '\n'
      << "mu_hat=" << join(mu_hat) << '\n'
      << "candidate_ks=" << join(candidate_Ks) << '\n'
      << "candidate_mu=" << join(candidate_mu) << '\n'
      << "nonpositive_weights=" << (nonpositive_weights ? 1 : 0) << '\n';
}

SelectionResult SelectionResult::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open selection file " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  SelectionResult r;
  r.Ks = split<int>(kv["chosen_ks"]);
  r.mu = split<double>(kv["mu"]);
  r.mu_hat = split<double>(kv["mu_hat"]);
  r.candidate_Ks = split<int>(kv["candidate_ks"]);
  r.candidate_mu = split<double>(kv["candidate_mu"]);
  r.nonpositive_weights = kv["nonpositive_weights"] == "1";
  if (r.Ks.empty() || r.Ks.size() != r.mu_hat.size()) {
    throw IoError("malformed selection file " + path.string());
  }
  return r;
}

}  // namespace mthash
