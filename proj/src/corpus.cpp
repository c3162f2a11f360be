#include "mthash/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mthash/error.hpp"

namespace mthash {

SparseDocVector SparseDocVector::from_entries(std::vector<Entry> entries) {
  for (const auto& e : entries) {
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw InvalidArgument("document weights must be finite and non-negative");
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.term < b.term; });
  SparseDocVector v;
  v.entries_.reserve(entries.size());
  for (const auto& e : entries) {
    if (!v.entries_.empty() && v.entries_.back().term == e.term) {
      v.entries_.back().weight += e.weight;
    } else {
      v.entries_.push_back(e);
    }
  }
  std::erase_if(v.entries_, [](const Entry& e) { return e.weight == 0.0; });
  double sq = 0.0;
  for (const auto& e : v.entries_) sq += e.weight * e.weight;
  v.norm_ = std::sqrt(sq);
  return v;
}

double SparseDocVector::total_weight() const noexcept {
  double s = 0.0;
  for (const auto& e : entries_) s += e.weight;
  return s;
}

double dot(const SparseDocVector& a, const SparseDocVector& b) {
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  double s = 0.0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].term < eb[j].term) {
      ++i;
    } else if (eb[j].term < ea[i].term) {
      ++j;
    } else {
      s += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    }
  }
  return s;
}

double cosine(const SparseDocVector& a, const SparseDocVector& b) {
  if (a.norm() == 0.0 || b.norm() == 0.0) return 0.0;
  double c = dot(a, b) / (a.norm() * b.norm());
  return std::clamp(c, 0.0, 1.0);
}

TagSet::TagSet(std::vector<TagId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

bool TagSet::contains(TagId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

bool TagSet::intersects(const TagSet& other) const {
  std::size_t i = 0, j = 0;
  while (i < ids_.size() && j < other.ids_.size()) {
    if (ids_[i] == other.ids_[j]) return true;
    if (ids_[i] < other.ids_[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return false;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::add(std::string_view term) {
  auto [it, inserted] = ids_.try_emplace(std::string(term), static_cast<std::uint32_t>(terms_.size()));
  if (inserted) terms_.emplace_back(term);
  return it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::vector<std::uint32_t> order(terms_.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [this](std::uint32_t a, std::uint32_t b) { return terms_[a] < terms_[b]; });
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (auto id : order) out << terms_[id] << '\t' << id << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::pair<std::uint32_t, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError("expected term<TAB>id", lineno);
    std::uint32_t id = 0;
    try {
      id = static_cast<std::uint32_t>(std::stoul(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw ParseError("bad id", lineno);
    }
    rows.emplace_back(id, line.substr(0, tab));
  }
  std::sort(rows.begin(), rows.end());
  Vocabulary v;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i) throw IoError("vocabulary ids are not dense in " + path.string());
    v.add(rows[i].second);
  }
  return v;
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (!stopwords.contains(cur)) {
      out.push_back(stemmer ? stemmer(cur) : cur);
      if (out.back().empty()) out.pop_back();
    }
    cur.clear();
  };
  for (char ch : text) {
    auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc)) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  flush();
  return out;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::kJsonl;
  if (name == "tsv") return CorpusFormat::kTsv;
  throw InvalidArgument("unknown corpus format '" + std::string(name) + "' (expected jsonl or tsv)");
}

bool Corpus::has_tags() const {
  return std::any_of(tags.begin(), tags.end(), [](const TagSet& t) { return !t.empty(); });
}

namespace {

struct RawRecord {
  std::string text;
  std::vector<std::string> tags;
};

RawRecord parse_jsonl_record(const std::string& line, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object", lineno);
  RawRecord r;
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) throw ParseError("missing string field 'text'", lineno);
  r.text = text->get<std::string>();
  if (auto tags = j.find("tags"); tags != j.end() && !tags->is_null()) {
    if (!tags->is_array()) throw ParseError("field 'tags' must be an array", lineno);
    for (const auto& t : *tags) {
      if (!t.is_string()) throw ParseError("tags must be strings", lineno);
      r.tags.push_back(t.get<std::string>());
    }
  }
  return r;
}

RawRecord parse_tsv_record(const std::string& line, std::size_t lineno) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) throw ParseError("expected label<TAB>text", lineno);
  RawRecord r;
  r.text = line.substr(tab + 1);
  std::stringstream labels(line.substr(0, tab));
  std::string tag;
  while (std::getline(labels, tag, ',')) {
    if (!tag.empty()) r.tags.push_back(tag);
  }
  return r;
}

template <typename TermLookup, typename TagLookup>
Corpus read_records(std::istream& in, CorpusFormat format, const Tokenizer& tokenizer,
                    Corpus corpus, TermLookup&& term_id, TagLookup&& tag_id) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    RawRecord rec = format == CorpusFormat::kJsonl ? parse_jsonl_record(line, lineno)
                                                   : parse_tsv_record(line, lineno);
    std::vector<SparseDocVector::Entry> entries;
    for (const auto& tok : tokenizer.tokenize(rec.text)) {
      if (auto id = term_id(corpus.vocab, tok)) entries.push_back({*id, 1.0});
    }
    std::vector<TagId> tag_ids;
    for (const auto& t : rec.tags) tag_ids.push_back(tag_id(corpus.tag_names, t));
    corpus.docs.push_back(SparseDocVector::from_entries(std::move(entries)));
    corpus.tags.emplace_back(std::move(tag_ids));
  }
  if (corpus.docs.empty()) throw EmptyCorpusError("corpus contains no records");
  return corpus;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

Corpus read_corpus(std::istream& in, CorpusFormat format, const Tokenizer& tokenizer) {
  return read_records(
      in, format, tokenizer, Corpus{},
      [](Vocabulary& v, const std::string& t) -> std::optional<std::uint32_t> { return v.add(t); },
      [](Vocabulary& v, const std::string& t) { return v.add(t); });
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const Tokenizer& tokenizer) {
  auto in = open_input(path);
  return read_corpus(in, format, tokenizer);
}

Corpus read_corpus_with_vocab(std::istream& in, CorpusFormat format, const Vocabulary& vocab,
                              const Vocabulary& tag_names, const Tokenizer& tokenizer) {
  Corpus seed;
  seed.vocab = vocab;
  seed.tag_names = tag_names;
  return read_records(
      in, format, tokenizer, std::move(seed),
      [](const Vocabulary& v, const std::string& t) { return v.find(t); },
      [](Vocabulary& v, const std::string& t) { return v.add(t); });
}

Corpus load_corpus_with_vocab(const std::filesystem::path& path, CorpusFormat format,
                              const Vocabulary& vocab, const Vocabulary& tag_names,
                              const Tokenizer& tokenizer) {
  auto in = open_input(path);
  return read_corpus_with_vocab(in, format, vocab, tag_names, tokenizer);
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  for (std::size_t i = 0; i < corpus.n(); ++i) {
    std::string text;
    for (const auto& e : corpus.docs[i].entries()) {
      auto reps = static_cast<long>(std::lround(e.weight));
      for (long r = 0; r < reps; ++r) {
        if (!text.empty()) text.push_back(' ');
        text += corpus.vocab.term(e.term);
      }
    }
    nlohmann::json j;
    j["text"] = text;
    j["tags"] = nlohmann::json::array();
    for (auto t : corpus.tags[i].ids()) j["tags"].push_back(corpus.tag_names.term(t));
    out << j.dump() << '\n';
  }
}

SparseDocVector vectorize_text(std::string_view text, const Vocabulary& vocab,
                               const Tokenizer& tokenizer) {
  std::vector<SparseDocVector::Entry> entries;
  for (const auto& tok : tokenizer.tokenize(text)) {
    if (auto id = vocab.find(tok)) entries.push_back({*id, 1.0});
  }
  return SparseDocVector::from_entries(std::move(entries));
}

TfidfModel TfidfModel::fit(const Corpus& corpus) {
  if (corpus.n() == 0) throw EmptyCorpusError("tf-idf requires a non-empty corpus");
  std::vector<std::size_t> df(corpus.d(), 0);
  for (const auto& doc : corpus.docs) {
    for (const auto& e : doc.entries()) ++df[e.term];
  }
  TfidfModel m;
  m.idf_.resize(corpus.d());
  const double n = static_cast<double>(corpus.n());
  for (std::size_t t = 0; t < df.size(); ++t) {
    m.idf_[t] = std::max(0.0, std::log(n / (1.0 + static_cast<double>(df[t]))));
  }
  return m;
}

SparseDocVector TfidfModel::apply(const SparseDocVector& counts) const {
  std::vector<SparseDocVector::Entry> entries;
  entries.reserve(counts.nnz());
  for (const auto& e : counts.entries()) entries.push_back({e.term, e.weight * idf(e.term)});
  return SparseDocVector::from_entries(std::move(entries));
}

Corpus tfidf_transform(const Corpus& corpus) {
  auto model = TfidfModel::fit(corpus);
  Corpus out = corpus;
  for (auto& doc : out.docs) doc = model.apply(doc);
  return out;
}

std::vector<SparseDocVector> keyword_vectors(const Corpus& corpus, KeywordWeighting weighting) {
  if (weighting == KeywordWeighting::kRaw) return corpus.docs;
  auto model = TfidfModel::fit(corpus);
  std::vector<SparseDocVector> out;
  out.reserve(corpus.n());
  for (const auto& doc : corpus.docs) out.push_back(model.apply(doc));
  return out;
}

CorpusStats stats(const Corpus& corpus) {
  if (corpus.n() == 0) throw EmptyCorpusError("statistics of an empty corpus");
  CorpusStats s;
  s.n = corpus.n();
  s.d = corpus.d();
  double nnz = 0.0, len = 0.0;
  for (const auto& doc : corpus.docs) {
    nnz += static_cast<double>(doc.nnz());
    len += doc.total_weight();
  }
  s.avg_sparsity_s = nnz / static_cast<double>(s.n);
  s.avg_length = len / static_cast<double>(s.n);
  return s;
}

}  // namespace mthash
