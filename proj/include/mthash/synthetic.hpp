#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mthash/corpus.hpp"

namespace mthash {

enum class TagLevel { kCoarse, kFine };

/// Short documents drawn from a two-level topic hierarchy: every fine topic
/// is nested in exactly one coarse topic, and each coarse topic has the same
/// number of children.
struct SyntheticParams {
  std::size_t n = 2000;
  std::size_t n_test = 0;
  TagLevel tag_level = TagLevel::kCoarse;
  int coarse_topics = 4;
  int fine_topics = 12;
  std::size_t vocab = 500;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
  // Token mixture: coarse-topic words, fine-topic words, the rest background.
  double coarse_share = 0.35;
  double fine_share = 0.45;
  // Optional label-independent facets: each document also draws one facet
  // uniformly and takes this share of its tokens from the facet's words.
  int facets = 0;
  double facet_share = 0.0;
  std::uint64_t seed = 1;

  /// Throws InvalidArgument for an inconsistent hierarchy or mixture.
  void validate() const;
};

struct SyntheticDoc {
  std::string text;
  std::vector<std::string> tags;
  int coarse = 0;
  int fine = 0;
  int facet = -1;
};

struct SyntheticCorpus {
  std::vector<SyntheticDoc> train;
  std::vector<SyntheticDoc> test;
};

/// Byte-identical output for a fixed parameter set.
SyntheticCorpus gen_synthetic(const SyntheticParams& params);

void write_jsonl(std::span<const SyntheticDoc> docs, std::ostream& out);

/// Parses generated documents as a corpus; with a reference corpus, against
/// its vocabulary and tag registry.
Corpus to_corpus(std::span<const SyntheticDoc> docs);
Corpus to_corpus(std::span<const SyntheticDoc> docs, const Corpus& reference);

TagLevel parse_tag_level(std::string_view name);

}  // namespace mthash
