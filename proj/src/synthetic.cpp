#include "mthash/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mthash/error.hpp"

namespace mthash {

void SyntheticParams::validate() const {
  if (coarse_topics < 1) throw InvalidArgument("synthetic: need at least one coarse topic");
  if (fine_topics < coarse_topics || fine_topics % coarse_topics != 0) {
    throw InvalidArgument("synthetic: fine topics must refine the coarse topics evenly (fine=" +
                          std::to_string(fine_topics) + ", coarse=" + std::to_string(coarse_topics) + ")");
  }
  if (n == 0) throw InvalidArgument("synthetic: n must be positive");
  if (min_len == 0 || max_len < min_len) throw InvalidArgument("synthetic: need 1 <= min_len <= max_len");
  if (facets < 0 || (facets == 0 && facet_share != 0.0)) {
    throw InvalidArgument("synthetic: facet_share needs at least one facet");
  }
  if (coarse_share < 0.0 || fine_share < 0.0 || facet_share < 0.0 ||
      coarse_share + fine_share + facet_share > 1.0) {
    throw InvalidArgument("synthetic: token shares must be non-negative and sum to at most 1");
  }
  const std::size_t topical = vocab - vocab / 5;
  if (vocab < 10 || topical * 2 / 5 < 2 * static_cast<std::size_t>(coarse_topics) ||
      topical * 3 / 5 < 2 * static_cast<std::size_t>(fine_topics + facets)) {
    throw InvalidArgument("synthetic: vocabulary too small for the hierarchy");
  }
}

namespace {

// Portable draws; the standard distributions are implementation-defined.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(rng, i)]);
}

// Word block with a Zipf-like within-block distribution.
struct Block {
  std::vector<std::size_t> words;
  std::vector<double> cdf;

  std::size_t draw(std::mt19937_64& rng) const {
    const double u = uniform01(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return words[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), words.size() - 1)];
  }
};

Block make_block(const std::vector<std::size_t>& perm, std::size_t begin, std::size_t size) {
  Block b;
  double acc = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    b.words.push_back(perm[begin + r]);
    acc += 1.0 / std::pow(static_cast<double>(r + 1), 0.8);
    b.cdf.push_back(acc);
  }
  return b;
}

std::string word_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "w%04zu", id);
  return buf;
}

}  // namespace

SyntheticCorpus gen_synthetic(const SyntheticParams& p) {
  p.validate();
  std::mt19937_64 rng(p.seed);
  const std::size_t C = static_cast<std::size_t>(p.coarse_topics);
  const std::size_t F = static_cast<std::size_t>(p.fine_topics);
  const std::size_t children = F / C;

  std::vector<std::size_t> perm(p.vocab);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  const std::size_t background = p.vocab / 5;
  const std::size_t topical = p.vocab - background;
  const std::size_t coarse_size = topical * 2 / 5 / C;
  const std::size_t facet_count = static_cast<std::size_t>(p.facets);
  const std::size_t fine_size = (topical - coarse_size * C) / (F + facet_count);
  std::size_t at = 0;
  Block bg = make_block(perm, at, background);
  at += background;
  std::vector<Block> coarse, fine;
  for (std::size_t c = 0; c < C; ++c, at += coarse_size) coarse.push_back(make_block(perm, at, coarse_size));
  for (std::size_t f = 0; f < F; ++f, at += fine_size) fine.push_back(make_block(perm, at, fine_size));
  std::vector<Block> facet;
  for (std::size_t f = 0; f < facet_count; ++f, at += fine_size) facet.push_back(make_block(perm, at, fine_size));

  auto make_doc = [&](SyntheticDoc& d) {
    d.coarse = static_cast<int>(below(rng, C));
    d.fine = d.coarse * static_cast<int>(children) + static_cast<int>(below(rng, children));
    if (facet_count > 0) d.facet = static_cast<int>(below(rng, facet_count));
    const std::size_t len = p.min_len + below(rng, p.max_len - p.min_len + 1);
    for (std::size_t t = 0; t < len; ++t) {
      const double u = uniform01(rng);
      std::size_t w;
      if (u < p.coarse_share) {
        w = coarse[static_cast<std::size_t>(d.coarse)].draw(rng);
      } else if (u < p.coarse_share + p.fine_share) {
        w = fine[static_cast<std::size_t>(d.fine)].draw(rng);
      } else if (u < p.coarse_share + p.fine_share + p.facet_share) {
        w = facet[static_cast<std::size_t>(d.facet)].draw(rng);
      } else {
        w = bg.draw(rng);
      }
      if (t) d.text += ' ';
      d.text += word_name(w);
    }
    char tag[32];
    if (p.tag_level == TagLevel::kCoarse) {
      std::snprintf(tag, sizeof tag, "c%d", d.coarse);
    } else {
      std::snprintf(tag, sizeof tag, "c%df%d", d.coarse, d.fine);
    }
    d.tags.emplace_back(tag);
  };

  SyntheticCorpus out;
  out.train.resize(p.n);
  for (auto& d : out.train) make_doc(d);
  out.test.resize(p.n_test);
  for (auto& d : out.test) make_doc(d);
  return out;
}

void write_jsonl(std::span<const SyntheticDoc> docs, std::ostream& out) {
  for (const auto& d : docs) {
    nlohmann::json j;
    j["text"] = d.text;
    j["tags"] = d.tags;
    out << j.dump() << '\n';
  }
}

Corpus to_corpus(std::span<const SyntheticDoc> docs) {
  std::stringstream ss;
  write_jsonl(docs, ss);
  return read_corpus(ss, CorpusFormat::kJsonl);
}

Corpus to_corpus(std::span<const SyntheticDoc> docs, const Corpus& reference) {
  std::stringstream ss;
  write_jsonl(docs, ss);
  return read_corpus_with_vocab(ss, CorpusFormat::kJsonl, reference.vocab, reference.tag_names);
}

TagLevel parse_tag_level(std::string_view name) {
  if (name == "coarse") return TagLevel::kCoarse;
  if (name == "fine") return TagLevel::kFine;
  throw InvalidArgument("unknown tag level '" + std::string(name) + "' (expected coarse or fine)");
}

}  // namespace mthash
