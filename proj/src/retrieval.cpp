#include "mthash/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "mthash/error.hpp"

namespace mthash {

HammingIndex::HammingIndex(std::span<const HashCode> codes, std::size_t l) : HammingIndex(l) {
  words_.reserve(codes.size() * words_per_code_);
  for (std::size_t i = 0; i < codes.size(); ++i) add(codes[i], i);
}

void HammingIndex::add(const HashCode& code, std::size_t id) {
  if (code.l() != l_) throw ShapeMismatch("HammingIndex: code has the wrong bit width");
  auto w = code.words();
  words_.insert(words_.end(), w.begin(), w.end());
  ids_.push_back(id);
}

std::vector<int> HammingIndex::distances(const HashCode& query) const {
  if (query.l() != l_) throw ShapeMismatch("HammingIndex: query has the wrong bit width");
  auto q = query.words();
  std::vector<int> dist(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const std::uint64_t* w = &words_[i * words_per_code_];
    int d = 0;
    for (std::size_t k = 0; k < words_per_code_; ++k) d += std::popcount(w[k] ^ q[k]);
    dist[i] = d;
  }
  return dist;
}

std::vector<SearchHit> HammingIndex::search_radius(const HashCode& query, int r) const {
  if (r < 0 || static_cast<std::size_t>(r) > l_) {
    throw InvalidArgument("search radius must be in [0, l]");
  }
  auto dist = distances(query);
  std::vector<SearchHit> hits;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= r) hits.push_back({ids_[i], dist[i]});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
  });
  return hits;
}

std::vector<SearchHit> HammingIndex::search_topk(const HashCode& query, std::size_t K) const {
  if (K > ids_.size()) throw InvalidArgument("search_topk: K exceeds index size");
  auto dist = distances(query);
  // Bucket by distance; within a bucket keep slots in increasing id order.
  std::vector<std::vector<std::size_t>> buckets(l_ + 1);
  for (std::size_t i = 0; i < dist.size(); ++i) buckets[static_cast<std::size_t>(dist[i])].push_back(i);
  std::vector<SearchHit> hits;
  hits.reserve(K);
  for (std::size_t d = 0; d <= l_ && hits.size() < K; ++d) {
    auto& b = buckets[d];
    std::sort(b.begin(), b.end(), [&](std::size_t x, std::size_t y) { return ids_[x] < ids_[y]; });
    for (auto slot : b) {
      if (hits.size() == K) break;
      hits.push_back({ids_[slot], static_cast<int>(d)});
    }
  }
  return hits;
}

std::vector<HashCode> to_hash_codes(const CodeMatrix& codes) {
  std::vector<HashCode> out;
  out.reserve(codes.n);
  for (std::size_t i = 0; i < codes.n; ++i) {
    out.push_back(HashCode::from_signs(std::span<const std::int8_t>(&codes.bits[i * codes.l], codes.l)));
  }
  return out;
}

EvalRow evaluate(const HammingIndex& train_index, std::span<const TagSet> train_tags,
                 std::span<const HashCode> test_codes, std::span<const TagSet> test_tags,
                 const EvalParams& params) {
  if (test_codes.size() != test_tags.size()) throw ShapeMismatch("evaluate: one tag set per query");
  if (train_tags.size() != train_index.size()) throw ShapeMismatch("evaluate: one tag set per indexed code");
  const int radius = std::min<int>(params.radius, static_cast<int>(train_index.l()));
  const std::size_t top_k = std::min(params.top_k, train_index.size());

  EvalRow row;
  row.bits = train_index.l();
  double sum_prec = 0.0, sum_recall = 0.0, sum_topk = 0.0;
  std::size_t recall_queries = 0;
  std::size_t pooled_retrieved = 0, pooled_relevant_retrieved = 0, pooled_relevant = 0;
  for (std::size_t q = 0; q < test_codes.size(); ++q) {
    const TagSet& qt = test_tags[q];
    if (qt.empty()) {
      ++row.skipped_queries;
      continue;
    }
    ++row.queries;
    std::size_t total_relevant = 0;
    for (const auto& t : train_tags) total_relevant += t.intersects(qt) ? 1 : 0;

    auto in_radius = train_index.search_radius(test_codes[q], radius);
    std::size_t rel = 0;
    for (const auto& h : in_radius) rel += train_tags[h.id].intersects(qt) ? 1 : 0;
    if (in_radius.empty()) {
      ++row.empty_queries;
    } else {
      sum_prec += static_cast<double>(rel) / static_cast<double>(in_radius.size());
    }
    if (total_relevant > 0) {
      sum_recall += static_cast<double>(rel) / static_cast<double>(total_relevant);
      ++recall_queries;
    }
    pooled_retrieved += in_radius.size();
    pooled_relevant_retrieved += rel;
    pooled_relevant += total_relevant;

    if (top_k > 0) {
      auto top = train_index.search_topk(test_codes[q], top_k);
      std::size_t rel_top = 0;
      for (const auto& h : top) rel_top += train_tags[h.id].intersects(qt) ? 1 : 0;
      sum_topk += static_cast<double>(rel_top) / static_cast<double>(top.size());
    }
  }
  if (row.queries > 0) {
    const double nq = static_cast<double>(row.queries);
    row.mp_radius = sum_prec / nq;
    row.mp_topk = sum_topk / nq;
  }
  if (params.micro_pooling) {
    row.precision = pooled_retrieved ? static_cast<double>(pooled_relevant_retrieved) / pooled_retrieved : 0.0;
    row.recall = pooled_relevant ? static_cast<double>(pooled_relevant_retrieved) / pooled_relevant : 0.0;
  } else {
    row.precision = row.mp_radius;
    row.recall = recall_queries ? sum_recall / static_cast<double>(recall_queries) : 0.0;
  }
  return row;
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "bits,precision,recall,mp_topk,mp_radius,empty_queries\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%zu\n", r.bits, r.precision, r.recall,
                  r.mp_topk, r.mp_radius, r.empty_queries);
    out << buf;
  }
}

EvalReport EvalReport::read_csv(std::istream& in) {
  EvalReport report;
  std::string line;
  if (!std::getline(in, line) || line != "bits,precision,recall,mp_topk,mp_radius,empty_queries") {
    throw ParseError("unexpected evaluation CSV header", 1);
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EvalRow r;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    if (!(is >> r.bits >> r.precision >> r.recall >> r.mp_topk >> r.mp_radius >> r.empty_queries)) {
      throw ParseError("malformed evaluation row", lineno);
    }
    report.rows.push_back(r);
  }
  return report;
}

HashCode LshModel::encode(const SparseDocVector& counts) const {
  return planes.encode(tfidf.apply(counts));
}

LshResult lsh_baseline(const Corpus& corpus, std::size_t l, std::uint64_t seed) {
  if (l == 0) throw InvalidArgument("lsh_baseline: l must be positive");
  LshResult r{LshModel{TfidfModel::fit(corpus), {}}, {}};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(corpus.d());
  r.model.planes.W.resize(d, static_cast<Eigen::Index>(l));
  for (Eigen::Index j = 0; j < r.model.planes.W.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) r.model.planes.W(i, j) = gauss(rng);
  }
  r.model.planes.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l));
  r.codes.reserve(corpus.n());
  for (const auto& doc : corpus.docs) r.codes.push_back(r.model.encode(doc));
  return r;
}

}  // namespace mthash
