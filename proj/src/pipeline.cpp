#include "mthash/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "mthash/hash_code.hpp"
#include "mthash/log.hpp"

namespace mthash {

namespace fs = std::filesystem;

std::string_view variant_name(Variant v) { return v == Variant::kFea ? "fea" : "dec"; }

Variant parse_variant(std::string_view name) {
  if (name == "fea") return Variant::kFea;
  if (name == "dec") return Variant::kDec;
  throw InvalidArgument("unknown variant '" + std::string(name) + "' (expected fea or dec)");
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  value = trim(value);
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw InvalidArgument("config: '" + std::string(key) + "' has invalid value '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  value = trim(value);
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("config: '" + std::string(key) + "' expects true or false");
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  for (auto part : split(value, ',')) out.push_back(parse_number<int>(key, part));
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument("config: " + message);
}

const char* const kTopicKeys[] = {"corpus", "corpus_format", "topic_corpus", "candidate_ks", "fixed_ks",
                                  "lda_alpha", "lda_beta", "lda_iters", "infer_iters", "average_last",
                                  "lda_seed"};
const char* const kSelectionKeys[] = {"M", "fixed_ks", "unit_weights", "k_relief", "m_sample", "relief_seed"};
const char* const kCodeKeys[] = {"k_nn", "a", "b", "variant", "C1", "C2", "dec_max_iters", "dec_tol",
                                 "svm_C", "svm_bias", "svm_epochs", "svm_seed", "hash_input"};

}  // namespace

std::vector<std::size_t> parse_bit_sweep(std::string_view text) {
  text = trim(text);
  std::vector<std::size_t> out;
  if (text.find(':') != std::string_view::npos) {
    auto parts = split(text, ':');
    if (parts.size() != 3) throw InvalidArgument("bit sweep must be start:step:stop");
    const auto start = parse_number<std::size_t>("bits", parts[0]);
    const auto step = parse_number<std::size_t>("bits", parts[1]);
    const auto stop = parse_number<std::size_t>("bits", parts[2]);
    if (step == 0 || start == 0 || stop < start) throw InvalidArgument("bit sweep needs 0 < start <= stop and step > 0");
    for (std::size_t l = start; l <= stop; l += step) out.push_back(l);
  } else {
    for (auto part : split(text, ',')) out.push_back(parse_number<std::size_t>("bits", part));
  }
  if (out.empty()) throw InvalidArgument("bit sweep is empty");
  for (auto l : out) {
    if (l == 0) throw InvalidArgument("bit widths must be positive");
  }
  return out;
}

void PipelineConfig::set(std::string_view key_in, std::string_view value_in) {
  const std::string key(trim(key_in));
  const std::string_view value = trim(value_in);
  auto num_double = [&] { return parse_number<double>(key, value); };
  auto num_int = [&] { return parse_number<int>(key, value); };
  auto num_size = [&] { return parse_number<std::size_t>(key, value); };
  auto num_u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  if (key == "corpus") {
    corpus = value;
  } else if (key == "corpus_format") {
    parse_corpus_format(value);
    corpus_format = value;
  } else if (key == "topic_corpus") {
    topic_corpus = value;
  } else if (key == "test_corpus") {
    test_corpus = value;
  } else if (key == "model_dir") {
    require(!value.empty(), "model_dir must not be empty");
    model_dir = value;
  } else if (key == "candidate_ks") {
    candidate_ks = parse_int_list(key, value);
  } else if (key == "M") {
    M = num_size();
  } else if (key == "fixed_ks") {
    fixed_ks = parse_int_list(key, value);
  } else if (key == "unit_weights") {
    unit_weights = parse_bool(key, value);
  } else if (key == "k_relief") {
    k_relief = num_size();
  } else if (key == "m_sample") {
    m_sample = num_size();
  } else if (key == "lda_alpha") {
    lda_alpha = num_double();
  } else if (key == "lda_beta") {
    lda_beta = num_double();
  } else if (key == "lda_iters") {
    lda_iters = num_int();
  } else if (key == "infer_iters") {
    infer_iters = num_int();
  } else if (key == "average_last") {
    average_last = num_int();
  } else if (key == "k_nn") {
    k_nn = num_size();
  } else if (key == "a") {
    a = num_double();
  } else if (key == "b") {
    b = num_double();
  } else if (key == "bits") {
    bits = parse_bit_sweep(value);
  } else if (key == "variant") {
    variant = parse_variant(value);
  } else if (key == "C1") {
    C1 = num_double();
  } else if (key == "C2") {
    C2 = num_double();
  } else if (key == "dec_max_iters") {
    dec_max_iters = num_int();
  } else if (key == "dec_tol") {
    dec_tol = num_double();
  } else if (key == "svm_C") {
    svm_C = num_double();
  } else if (key == "svm_bias") {
    svm_bias = parse_bool(key, value);
  } else if (key == "svm_epochs") {
    svm_epochs = num_int();
  } else if (key == "hash_input") {
    if (value == "topics") {
      hash_input = HashInput::kTopics;
    } else if (value == "keywords") {
      hash_input = HashInput::kKeywords;
    } else {
      throw InvalidArgument("config: hash_input expects topics or keywords");
    }
  } else if (key == "radius") {
    radius = num_int();
  } else if (key == "top_k") {
    top_k = num_size();
  } else if (key == "lda_seed") {
    lda_seed = num_u64();
  } else if (key == "relief_seed") {
    relief_seed = num_u64();
  } else if (key == "svm_seed") {
    svm_seed = num_u64();
  } else if (key == "lsh_seed") {
    lsh_seed = num_u64();
  } else {
    throw InvalidArgument("config: unknown key '" + key + "'");
  }
}

void PipelineConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidArgument("override must be key=value: '" + std::string(assignment) + "'");
  set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

void PipelineConfig::validate() const {
  require(!candidate_ks.empty() || !fixed_ks.empty(), "candidate_ks must not be empty");
  for (int K : bank_ks()) require(K >= 2, "every K must be at least 2");
  {
    std::set<int> seen(candidate_ks.begin(), candidate_ks.end());
    require(seen.size() == candidate_ks.size(), "candidate_ks has duplicates");
    std::set<int> fixed(fixed_ks.begin(), fixed_ks.end());
    require(fixed.size() == fixed_ks.size(), "fixed_ks has duplicates");
  }
  if (fixed_ks.empty()) require(M >= 1 && M <= candidate_ks.size(), "M must be in [1, |candidate_ks|]");
  require(k_relief >= 1, "k_relief must be positive");
  require(m_sample >= 1, "m_sample must be positive");
  require(lda_alpha > 0.0 && lda_beta > 0.0, "lda_alpha and lda_beta must be positive");
  require(lda_iters >= 1 && infer_iters >= 1, "lda_iters and infer_iters must be positive");
  require(average_last >= 1 && average_last <= infer_iters, "average_last must be in [1, infer_iters]");
  require(k_nn >= 1, "k_nn must be positive");
  require(a <= 1.0 && a >= b && b > 0.0, "need 1 >= a >= b > 0");
  require(!bits.empty(), "bits must not be empty");
  for (auto l : bits) require(l >= 1, "bit widths must be positive");
  require(C1 > 0.0 && C2 > 0.0, "C1 and C2 must be positive");
  require(dec_max_iters >= 1 && dec_tol >= 0.0, "dec_max_iters must be positive and dec_tol non-negative");
  require(svm_C > 0.0 && svm_epochs >= 1, "svm_C and svm_epochs must be positive");
  require(hash_input == HashInput::kTopics || variant == Variant::kFea, "hash_input=keywords needs variant=fea");
  require(radius >= 0, "radius must be non-negative");
  require(top_k >= 1, "top_k must be positive");
}

PipelineConfig PipelineConfig::parse(std::istream& in) {
  PipelineConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("config line is not key=value", lineno);
    try {
      c.set(t.substr(0, eq), t.substr(eq + 1));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse(in);
}

std::string PipelineConfig::to_text() const {
  std::ostringstream o;
  o << "corpus=" << corpus << '\n'
    << "corpus_format=" << corpus_format << '\n'
    << "topic_corpus=" << topic_corpus << '\n'
    << "test_corpus=" << test_corpus << '\n'
    << "model_dir=" << model_dir << '\n'
    << "candidate_ks=" << join(candidate_ks) << '\n'
    << "M=" << M << '\n'
    << "fixed_ks=" << join(fixed_ks) << '\n'
    << "unit_weights=" << (unit_weights ? "true" : "false") << '\n'
    << "k_relief=" << k_relief << '\n'
    << "m_sample=" << m_sample << '\n'
    << "lda_alpha=" << fmt_double(lda_alpha) << '\n'
    << "lda_beta=" << fmt_double(lda_beta) << '\n'
    << "lda_iters=" << lda_iters << '\n'
    << "infer_iters=" << infer_iters << '\n'
    << "average_last=" << average_last << '\n'
    << "k_nn=" << k_nn << '\n'
    << "a=" << fmt_double(a) << '\n'
    << "b=" << fmt_double(b) << '\n'
    << "bits=" << join(bits) << '\n'
    << "variant=" << variant_name(variant) << '\n'
    << "C1=" << fmt_double(C1) << '\n'
    << "C2=" << fmt_double(C2) << '\n'
    << "dec_max_iters=" << dec_max_iters << '\n'
    << "dec_tol=" << fmt_double(dec_tol) << '\n'
    << "svm_C=" << fmt_double(svm_C) << '\n'
    << "svm_bias=" << (svm_bias ? "true" : "false") << '\n'
    << "svm_epochs=" << svm_epochs << '\n'
    << "hash_input=" << (hash_input == HashInput::kTopics ? "topics" : "keywords") << '\n'
    << "radius=" << radius << '\n'
    << "top_k=" << top_k << '\n'
    << "lda_seed=" << lda_seed << '\n'
    << "relief_seed=" << relief_seed << '\n'
    << "svm_seed=" << svm_seed << '\n'
    << "lsh_seed=" << lsh_seed << '\n';
  return o.str();
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(to_text()); }

std::vector<int> PipelineConfig::bank_ks() const {
  std::set<int> all(candidate_ks.begin(), candidate_ks.end());
  all.insert(fixed_ks.begin(), fixed_ks.end());
  return {all.begin(), all.end()};
}

namespace {

std::uint64_t hash_keys(const PipelineConfig& c, std::span<const char* const> keys, std::uint64_t seed) {
  std::map<std::string, std::string> kv;
  std::istringstream in(c.to_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  std::uint64_t h = seed;
  for (const char* k : keys) h = fnv1a(std::string(k) + "=" + kv.at(k) + "\n", h);
  return h;
}

}  // namespace

std::uint64_t PipelineConfig::topics_hash() const { return hash_keys(*this, kTopicKeys, kFnvOffset); }
std::uint64_t PipelineConfig::selection_hash() const { return hash_keys(*this, kSelectionKeys, topics_hash()); }
std::uint64_t PipelineConfig::codes_hash() const { return hash_keys(*this, kCodeKeys, selection_hash()); }

// ---------------------------------------------------------------------------

namespace {

template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

bool stamp_matches(const fs::path& stamp, std::uint64_t h) {
  std::ifstream in(stamp);
  std::string line;
  return in && std::getline(in, line) && line == hex64(h);
}

void write_stamp(const fs::path& stamp, std::uint64_t h) {
  std::ofstream out(stamp);
  out << hex64(h) << '\n';
  if (!out) throw IoError("cannot write " + stamp.string());
}

std::string topic_file(int K) { return "topics/lda_K" + std::to_string(K) + ".bin"; }

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Pipeline::width_dir(const fs::path& model_dir, std::size_t l) {
  return model_dir / ("bits" + std::to_string(l));
}

const Corpus& Pipeline::training_corpus() {
  if (corpus_) return *corpus_;
  return run_stage("load-corpus", [&]() -> const Corpus& {
    if (config_.corpus.empty()) throw InvalidArgument("no training corpus configured (corpus=...)");
    const auto fmt = parse_corpus_format(config_.corpus_format);
    fs::create_directories(model_dir());
    if (config_.topic_corpus.empty()) {
      corpus_ = load_corpus(config_.corpus, fmt);
    } else {
      Corpus topic = load_corpus(config_.topic_corpus, fmt);
      corpus_ = load_corpus_with_vocab(config_.corpus, fmt, topic.vocab, topic.tag_names);
    }
    if (corpus_->n() == 0) throw EmptyCorpusError("training corpus is empty");
    corpus_->vocab.save(model_dir() / "vocab.tsv");
    corpus_->tag_names.save(model_dir() / "tags.tsv");
    return *corpus_;
  });
}

Corpus Pipeline::load_with_vocab(const fs::path& path) {
  const Corpus& train = training_corpus();
  return load_corpus_with_vocab(path, parse_corpus_format(config_.corpus_format), train.vocab,
                                train.tag_names);
}

const TopicModelBank& Pipeline::bank() {
  if (bank_) return *bank_;
  return run_stage("train-topics", [&]() -> const TopicModelBank& {
    const Corpus& train = training_corpus();
    std::uint64_t h = fnv1a(hex64(file_hash(config_.corpus)), config_.topics_hash());
    if (!config_.topic_corpus.empty()) h = fnv1a(hex64(file_hash(config_.topic_corpus)), h);
    const fs::path dir = model_dir() / "topics";
    const fs::path stamp = dir / "stamp";
    const auto Ks = config_.bank_ks();
    if (stamp_matches(stamp, h)) {
      std::vector<TopicModel> models;
      for (int K : Ks) models.push_back(TopicModel::load(model_dir() / topic_file(K)));
      bank_.emplace(std::move(models));
      return *bank_;
    }
    fs::create_directories(dir);
    LdaConfig lda;
    lda.alpha = config_.lda_alpha;
    lda.beta = config_.lda_beta;
    lda.iters = config_.lda_iters;
    lda.infer_iters = config_.infer_iters;
    lda.average_last = config_.average_last;
    lda.seed = config_.lda_seed;
    if (config_.topic_corpus.empty()) {
      bank_ = train_bank(train, Ks, lda);
    } else {
      Corpus topic = load_with_vocab(config_.topic_corpus);
      bank_ = train_bank(topic, Ks, lda);
    }
    for (const auto& m : bank_->models()) {
      const fs::path f = model_dir() / topic_file(m.num_topics());
      m.save(f);
      fs::path words = f;
      words.replace_extension(".topwords.txt");
      m.write_top_words(words, train.vocab);
    }
    write_stamp(stamp, h);
    return *bank_;
  });
}

const SelectionResult& Pipeline::selection() {
  if (selection_) return *selection_;
  const TopicModelBank& b = bank();
  return run_stage("select", [&]() -> const SelectionResult& {
    const fs::path stamp = model_dir() / "selection.stamp";
    const fs::path file = model_dir() / "selection.txt";
    const std::uint64_t h = fnv1a(hex64(file_hash(config_.corpus)), config_.selection_hash());
    if (stamp_matches(stamp, h)) {
      selection_ = SelectionResult::load(file);
      return *selection_;
    }
    if (!config_.fixed_ks.empty()) {
      selection_ = fixed_selection(config_.fixed_ks);
    } else {
      const Corpus& train = training_corpus();
      ReliefParams rp;
      rp.neighbors = config_.k_relief;
      rp.per_tag_sample = config_.m_sample;
      rp.seed = config_.relief_seed;
      auto models = b.subset(config_.candidate_ks);
      auto thetas = infer_table(models, train);
      auto keywords = keyword_vectors(train, rp.weighting);
      auto weights = relief_weights(keywords, train.tags, config_.candidate_ks, thetas, rp);
      selection_ = select_top(weights, config_.M);
      if (config_.unit_weights) std::fill(selection_->mu_hat.begin(), selection_->mu_hat.end(), 1.0);
    }
    selection_->save(file);
    write_stamp(stamp, h);
    return *selection_;
  });
}

std::vector<const TopicModel*> Pipeline::selected_models() {
  const auto& sel = selection();
  return bank().subset(sel.Ks);
}

const ThetaTable& Pipeline::training_thetas() {
  if (thetas_) return *thetas_;
  auto models = selected_models();
  thetas_ = infer_table(models, training_corpus());
  return *thetas_;
}

void Pipeline::train_topics() { bank(); }

void Pipeline::select() { selection(); }

void Pipeline::train_width(std::size_t l) { ensure_width(l, l); }

void Pipeline::train() {
  const std::size_t widest = *std::max_element(config_.bits.begin(), config_.bits.end());
  for (auto l : config_.bits) ensure_width(l, widest);
  write_manifest();
}

void Pipeline::ensure_width(std::size_t l, std::size_t widest) {
  run_stage("train", [&] {
    const fs::path dir = width_dir(model_dir(), l);
    const std::string model_name = config_.variant == Variant::kFea ? "model.fea" : "model.dec";
    const std::uint64_t h = fnv1a(hex64(file_hash(config_.corpus)) + ":" + std::to_string(l), config_.codes_hash());
    if (stamp_matches(dir / "stamp", h) && fs::exists(dir / model_name) && fs::exists(dir / "train_codes.bin")) {
      return;
    }
    const Corpus& train = training_corpus();
    const SelectionResult& sel = selection();
    const ThetaTable& thetas = training_thetas();
    if (l + 1 > train.n()) throw InvalidArgument("bit width " + std::to_string(l) + " needs more than l training documents");
    fs::create_directories(dir);
    AffinityParams ap;
    ap.k = config_.k_nn;
    ap.a = config_.a;
    ap.b = config_.b;
    std::vector<std::string> topic_files;
    for (int K : sel.Ks) topic_files.push_back(topic_file(K));

    CodeMatrix codes;
    if (config_.variant == Variant::kFea) {
      // The dense eigensolver returns the whole spectrum, so narrower widths
      // are column prefixes of one embedding.
      const EigenmapOptions eig;
      const bool dense = train.n() <= eig.dense_limit;
      const std::size_t fit_l = dense ? std::max(l, std::min(widest, train.n() - 1)) : l;
      if (!fea_cache_ || static_cast<std::size_t>(fea_cache_->embedding.Y.cols()) < fit_l || !dense) {
        fea_cache_ = fit_codes_fea(thetas, train.tags, sel, fit_l, ap, eig);
      }
      const auto& emb = fea_cache_->embedding;
      codes = median_binarize(Eigen::MatrixXd(emb.Y.leftCols(static_cast<Eigen::Index>(l))));

      SvmParams sp;
      sp.C = config_.svm_C;
      sp.bias = config_.svm_bias;
      sp.max_epochs = config_.svm_epochs;
      sp.seed = config_.svm_seed;
      FeaModel model;
      model.Ks = sel.Ks;
      model.mu_hat = sel.mu_hat;
      model.topic_files = topic_files;
      model.input = config_.hash_input;
      if (config_.hash_input == HashInput::kTopics) {
        model.fn = train_hash_fn(fea_cache_->omegas, codes, sp).fn;
      } else {
        auto tfidf = TfidfModel::fit(train);
        std::vector<SparseDocVector> x;
        for (const auto& d : train.docs) x.push_back(tfidf.apply(d));
        model.fn = train_hash_fn(x, train.d(), codes, sp).fn;
        model.idf.assign(tfidf.idf_values().begin(), tfidf.idf_values().end());
      }
      model.save(dir / model_name);
    } else {
      DecParams dp;
      dp.C1 = config_.C1;
      dp.C2 = config_.C2;
      dp.max_iters = config_.dec_max_iters;
      dp.tol = config_.dec_tol;
      auto fit = fit_codes_dec(thetas, train.tags, sel, l, ap, dp);
      codes = fit.codes;
      DecModel model = DecModel::from_fit(fit);
      model.topic_files = topic_files;
      model.save(dir / model_name);
    }
    auto hc = to_hash_codes(codes);
    save_codes(dir / "train_codes.bin", hc);
    write_stamp(dir / "stamp", h);
  });
}

namespace {

// A trained width loaded back from disk, exactly as a fresh process sees it.
struct WidthModel {
  Variant variant;
  std::optional<FeaModel> fea;
  std::optional<DecModel> dec;
  std::vector<TopicModel> topics;

  static WidthModel load(const fs::path& model_dir, std::size_t l, Variant variant) {
    WidthModel w{variant, {}, {}, {}};
    const fs::path dir = Pipeline::width_dir(model_dir, l);
    std::vector<std::string> files;
    if (variant == Variant::kFea) {
      w.fea = FeaModel::load(dir / "model.fea");
      if (w.fea->input == HashInput::kTopics) files = w.fea->topic_files;
    } else {
      w.dec = DecModel::load(dir / "model.dec");
      files = w.dec->topic_files;
    }
    for (const auto& f : files) w.topics.push_back(TopicModel::load(model_dir / f));
    return w;
  }

  HashCode encode(const SparseDocVector& x) const {
    std::vector<const TopicModel*> ptrs;
    for (const auto& t : topics) ptrs.push_back(&t);
    return variant == Variant::kFea ? fea->encode(ptrs, x) : dec->encode(ptrs, x);
  }

  std::size_t l() const { return variant == Variant::kFea ? fea->l() : dec->l(); }
};

}  // namespace

void Pipeline::encode(const fs::path& corpus, std::size_t l, const fs::path& out) {
  ensure_width(l, l);
  run_stage("encode", [&] {
    Corpus c = load_with_vocab(corpus);
    auto model = WidthModel::load(model_dir(), l, config_.variant);
    std::vector<HashCode> codes;
    codes.reserve(c.n());
    for (const auto& d : c.docs) codes.push_back(model.encode(d));
    save_codes(out, codes);
  });
}

std::vector<SearchHit> Pipeline::query(std::string_view text, const QueryOptions& options) {
  return run_stage("query", [&] {
    const std::size_t l = options.bits ? options.bits : config_.bits.front();
    if (options.radius && (*options.radius < 0 || static_cast<std::size_t>(*options.radius) > l)) {
      throw InvalidArgument("radius must be in [0, " + std::to_string(l) + "]");
    }
    const fs::path vocab_file = model_dir() / "vocab.tsv";
    if (!fs::exists(vocab_file)) throw IoError("missing model file " + vocab_file.string());
    const Vocabulary vocab = Vocabulary::load(vocab_file);
    const fs::path codes_file = width_dir(model_dir(), l) / "train_codes.bin";
    if (!fs::exists(codes_file)) throw IoError("missing model file " + codes_file.string());
    auto model = WidthModel::load(model_dir(), l, config_.variant);
    auto train_codes = load_codes(codes_file);
    HammingIndex index(train_codes, l);
    const HashCode q = model.encode(vectorize_text(text, vocab));
    if (options.top_k) return index.search_topk(q, std::min(*options.top_k, index.size()));
    return index.search_radius(q, options.radius.value_or(std::min<int>(config_.radius, static_cast<int>(l))));
  });
}

Pipeline::EvalOutput Pipeline::eval() {
  if (config_.test_corpus.empty()) throw StageError("eval", "no test corpus configured (test_corpus=...)");
  const std::size_t widest = *std::max_element(config_.bits.begin(), config_.bits.end());
  for (auto l : config_.bits) ensure_width(l, widest);
  write_manifest();
  return run_stage("eval", [&] {
    const Corpus& train = training_corpus();
    Corpus test = load_with_vocab(config_.test_corpus);
    EvalParams ep;
    ep.radius = config_.radius;
    ep.top_k = config_.top_k;
    EvalOutput out;
    const std::string vname(variant_name(config_.variant));
    for (auto l : config_.bits) {
      const fs::path dir = width_dir(model_dir(), l);
      auto model = WidthModel::load(model_dir(), l, config_.variant);
      std::vector<HashCode> test_codes;
      test_codes.reserve(test.n());
      for (const auto& d : test.docs) test_codes.push_back(model.encode(d));
      save_codes(dir / ("test_codes_" + vname + ".bin"), test_codes);
      HammingIndex index(load_codes(dir / "train_codes.bin"), l);
      out.method.rows.push_back(evaluate(index, train.tags, test_codes, test.tags, ep));

      auto lsh = lsh_baseline(train, l, config_.lsh_seed);
      std::vector<HashCode> lsh_test;
      lsh_test.reserve(test.n());
      for (const auto& d : test.docs) lsh_test.push_back(lsh.model.encode(d));
      save_codes(dir / "lsh_train_codes.bin", lsh.codes);
      save_codes(dir / "lsh_test_codes.bin", lsh_test);
      HammingIndex lsh_index(lsh.codes, l);
      out.lsh.rows.push_back(evaluate(lsh_index, train.tags, lsh_test, test.tags, ep));
    }
    {
      std::ofstream f(model_dir() / ("eval_" + vname + ".csv"));
      out.method.write_csv(f);
      if (!f) throw IoError("cannot write evaluation report");
    }
    {
      std::ofstream f(model_dir() / "eval_lsh.csv");
      out.lsh.write_csv(f);
      if (!f) throw IoError("cannot write evaluation report");
    }
    return out;
  });
}

void Pipeline::write_manifest() {
  run_stage("train", [&] {
    {
      std::ofstream cfg(model_dir() / "config.txt");
      cfg << config_.to_text();
    }
    std::ofstream m(model_dir() / "manifest.txt");
    m << "config_hash=" << hex64(config_.hash()) << '\n';
    m << "variant=" << variant_name(config_.variant) << '\n';
    m << "bits=" << join(config_.bits) << '\n';
    m << "file=vocab.tsv\nfile=tags.tsv\nfile=selection.txt\n";
    for (int K : config_.bank_ks()) m << "file=" << topic_file(K) << '\n';
    const std::string model_name = config_.variant == Variant::kFea ? "model.fea" : "model.dec";
    for (auto l : config_.bits) {
      const std::string d = "bits" + std::to_string(l) + "/";
      m << "file=" << d << model_name << '\n' << "file=" << d << "train_codes.bin\n";
    }
    if (!m) throw IoError("cannot write manifest");
  });
}

}  // namespace mthash
