#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace mthash {

using TermId = std::uint32_t;
using TagId = std::uint32_t;

/// Sparse non-negative document vector with strictly increasing term ids and
/// a cached Euclidean norm.
class SparseDocVector {
 public:
  struct Entry {
    TermId term;
    double weight;
    bool operator==(const Entry&) const = default;
  };

  SparseDocVector() = default;

  /// Builds a vector from unordered entries. Duplicate terms are summed and
  /// zero weights dropped; a negative or non-finite weight throws.
  static SparseDocVector from_entries(std::vector<Entry> entries);

  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  double norm() const noexcept { return norm_; }
  double total_weight() const noexcept;

  bool operator==(const SparseDocVector& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  double norm_ = 0.0;
};

double dot(const SparseDocVector& a, const SparseDocVector& b);

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(const SparseDocVector& a, const SparseDocVector& b);

/// Set of tag ids. An empty set means the document has no tags.
class TagSet {
 public:
  TagSet() = default;
  explicit TagSet(std::vector<TagId> ids);

  std::span<const TagId> ids() const noexcept { return ids_; }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t size() const noexcept { return ids_.size(); }
  bool contains(TagId id) const;
  bool intersects(const TagSet& other) const;

  bool operator==(const TagSet&) const = default;

 private:
  std::vector<TagId> ids_;  // sorted, unique
};

/// Bidirectional string <-> dense id map; ids are assigned in insertion order.
class Vocabulary {
 public:
  std::optional<std::uint32_t> find(std::string_view term) const;
  std::uint32_t add(std::string_view term);
  const std::string& term(std::uint32_t id) const { return terms_.at(id); }
  std::size_t size() const noexcept { return terms_.size(); }

  /// Writes `term<TAB>id` lines sorted by term.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return terms_ == other.terms_; }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Whitespace tokenizer with lowercasing, a stopword list and an optional
/// stemmer hook.
struct Tokenizer {
  std::unordered_set<std::string> stopwords;
  std::function<std::string(std::string_view)> stemmer;  // empty = no stemming

  std::vector<std::string> tokenize(std::string_view text) const;
};

enum class CorpusFormat { kJsonl, kTsv };

CorpusFormat parse_corpus_format(std::string_view name);

/// Documents as raw term counts, parallel tag sets, the term vocabulary and
/// the tag registry. Treated as immutable once built.
struct Corpus {
  std::vector<SparseDocVector> docs;
  std::vector<TagSet> tags;
  Vocabulary vocab;
  Vocabulary tag_names;

  std::size_t n() const noexcept { return docs.size(); }
  std::size_t d() const noexcept { return vocab.size(); }
  std::size_t q() const noexcept { return tag_names.size(); }
  bool has_tags() const;
};

struct CorpusStats {
  std::size_t n = 0;
  std::size_t d = 0;
  double avg_sparsity_s = 0.0;
  double avg_length = 0.0;
};

/// Reads a corpus and builds its vocabulary and tag registry.
Corpus read_corpus(std::istream& in, CorpusFormat format, const Tokenizer& tokenizer = {});
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const Tokenizer& tokenizer = {});

/// Reads a corpus against a fixed vocabulary (unknown terms are dropped).
/// Tags unseen in `tag_names` are appended to the corpus' copy of the registry.
Corpus read_corpus_with_vocab(std::istream& in, CorpusFormat format, const Vocabulary& vocab,
                              const Vocabulary& tag_names, const Tokenizer& tokenizer = {});
Corpus load_corpus_with_vocab(const std::filesystem::path& path, CorpusFormat format,
                              const Vocabulary& vocab, const Vocabulary& tag_names,
                              const Tokenizer& tokenizer = {});

/// Writes JSONL whose re-load reproduces the same documents, tags and ids.
/// Weights are rounded to integer repeat counts.
void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);

/// Raw term counts for a single text; out-of-vocabulary tokens are dropped.
SparseDocVector vectorize_text(std::string_view text, const Vocabulary& vocab,
                               const Tokenizer& tokenizer = {});

/// idf(t) = max(0, ln(n / (1 + df(t)))) fitted on a training corpus.
class TfidfModel {
 public:
  static TfidfModel fit(const Corpus& corpus);

  SparseDocVector apply(const SparseDocVector& counts) const;
  double idf(TermId term) const { return term < idf_.size() ? idf_[term] : 0.0; }
  std::span<const double> idf_values() const noexcept { return idf_; }

 private:
  std::vector<double> idf_;
};

/// Corpus with tf-idf weights; documents that lose every term stay, empty.
Corpus tfidf_transform(const Corpus& corpus);

enum class KeywordWeighting { kTfidf, kRaw };

/// Keyword-space vectors used for neighbour search.
std::vector<SparseDocVector> keyword_vectors(const Corpus& corpus, KeywordWeighting weighting);

/// Throws EmptyCorpusError for an empty corpus.
CorpusStats stats(const Corpus& corpus);

}  // namespace mthash
