#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mthash/corpus.hpp"
#include "mthash/hash_code.hpp"
#include "mthash/linear_hash.hpp"
#include "mthash/spectral.hpp"

namespace mthash {

struct SearchHit {
  std::size_t id;
  int distance;
  bool operator==(const SearchHit&) const = default;
};

/// Linear-scan Hamming index over packed codes of one bit width.
class HammingIndex {
 public:
  explicit HammingIndex(std::size_t l) : l_(l), words_per_code_((l + 63) / 64) {}
  HammingIndex(std::span<const HashCode> codes, std::size_t l);

  void add(const HashCode& code, std::size_t id);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t l() const noexcept { return l_; }
  std::size_t id(std::size_t slot) const { return ids_.at(slot); }

  /// Every entry within distance r, ordered by (distance, id).
  std::vector<SearchHit> search_radius(const HashCode& query, int r) const;
  /// The K nearest entries, ordered by (distance, id). Requires K <= size().
  std::vector<SearchHit> search_topk(const HashCode& query, std::size_t K) const;

 private:
  std::vector<int> distances(const HashCode& query) const;

  std::size_t l_;
  std::size_t words_per_code_;
  std::vector<std::uint64_t> words_;
  std::vector<std::size_t> ids_;
};

std::vector<HashCode> to_hash_codes(const CodeMatrix& codes);

struct EvalParams {
  int radius = 3;
  std::size_t top_k = 200;
  // Pool relevant/retrieved counts over queries instead of averaging per query.
  bool micro_pooling = false;
};

struct EvalRow {
  std::size_t bits = 0;
  double precision = 0.0;
  double recall = 0.0;
  double mp_topk = 0.0;
  double mp_radius = 0.0;
  std::size_t empty_queries = 0;    // nothing retrieved within the radius
  std::size_t skipped_queries = 0;  // untagged queries
  std::size_t queries = 0;          // evaluated queries
};

/// Each tagged test document queries the training index; a retrieved
/// document is relevant when its tags intersect the query's.
EvalRow evaluate(const HammingIndex& train_index, std::span<const TagSet> train_tags,
                 std::span<const HashCode> test_codes, std::span<const TagSet> test_tags,
                 const EvalParams& params = {});

struct EvalReport {
  std::vector<EvalRow> rows;

  /// CSV with header `bits,precision,recall,mp_topk,mp_radius,empty_queries`.
  void write_csv(std::ostream& out) const;
  static EvalReport read_csv(std::istream& in);
};

/// Random-hyperplane LSH over tf-idf keyword vectors.
struct LshModel {
  TfidfModel tfidf;
  LinearHashFunction planes;  // d x l Gaussian, zero bias

  HashCode encode(const SparseDocVector& counts) const;
};

struct LshResult {
  LshModel model;
  std::vector<HashCode> codes;  // training documents
};

LshResult lsh_baseline(const Corpus& corpus, std::size_t l, std::uint64_t seed);

}  // namespace mthash
