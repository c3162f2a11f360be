#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mthash/error.hpp"
#include "mthash/fuse_decision.hpp"
#include "mthash/fuse_feature.hpp"
#include "mthash/retrieval.hpp"
#include "mthash/selector.hpp"
#include "mthash/topics.hpp"

namespace mthash {

enum class Variant { kFea, kDec };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// Error raised by a pipeline stage; what() is "<stage>: <cause>".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Flat key=value configuration. Every key has a default; unknown keys and
/// invalid values are rejected when set.
struct PipelineConfig {
  // Paths.
  std::string corpus;
  std::string corpus_format = "jsonl";
  std::string topic_corpus;  // external corpus for the topic bank; empty = corpus
  std::string test_corpus;
  std::string model_dir = "model";

  // Topic bank and selection.
  std::vector<int> candidate_ks = {10, 30, 50, 70, 90, 120, 150};
  std::size_t M = 3;
  std::vector<int> fixed_ks;  // non-empty bypasses Relief selection
  bool unit_weights = false;  // fix mu_hat to 1
  std::size_t k_relief = 10;
  std::size_t m_sample = 100;
  double lda_alpha = 0.5;
  double lda_beta = 0.01;
  int lda_iters = 1000;
  int infer_iters = 20;
  int average_last = 5;

  // Codes and hash functions.
  std::size_t k_nn = 25;
  double a = 1.0;
  double b = 0.1;
  std::vector<std::size_t> bits = {8};
  Variant variant = Variant::kFea;
  double C1 = 1.0;
  double C2 = 1.0;
  int dec_max_iters = 30;
  double dec_tol = 1e-6;
  double svm_C = 1.0;
  bool svm_bias = true;
  int svm_epochs = 300;
  HashInput hash_input = HashInput::kTopics;

  // Evaluation.
  int radius = 3;
  std::size_t top_k = 200;

  // Seeds.
  std::uint64_t lda_seed = 1;
  std::uint64_t relief_seed = 1;
  std::uint64_t svm_seed = 7;
  std::uint64_t lsh_seed = 1;

  /// Assigns one key, validating the value. Throws InvalidArgument.
  void set(std::string_view key, std::string_view value);
  /// `key=value` from a command-line override.
  void apply_override(std::string_view assignment);
  /// Cross-field constraints.
  void validate() const;

  /// Lines of `key=value` (`#` comments and blank lines allowed).
  static PipelineConfig parse(std::istream& in);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Canonical text: every key in a fixed order.
  std::string to_text() const;
  /// FNV-1a over to_text().
  std::uint64_t hash() const;

  std::vector<int> bank_ks() const;  // candidate_ks plus fixed_ks, sorted unique

  // Cache keys of the individual stages.
  std::uint64_t topics_hash() const;
  std::uint64_t selection_hash() const;
  std::uint64_t codes_hash() const;
};

/// Parses "4:4:64" (start:step:stop) or a comma list "8,16". Throws InvalidArgument.
std::vector<std::size_t> parse_bit_sweep(std::string_view text);

struct QueryOptions {
  std::size_t bits = 0;               // 0 = first configured width
  std::optional<int> radius;          // radius search when set
  std::optional<std::size_t> top_k;   // otherwise top-K
};

/// Orchestrates training, encoding, querying and evaluation inside a model
/// directory. Every stage caches its output keyed by the relevant config hash.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path model_dir() const { return config_.model_dir; }

  void train_topics();
  void select();
  /// Trains every configured bit width and writes the manifest.
  void train();
  void train_width(std::size_t l);

  /// Encodes a corpus file with the width-l model into a codes file.
  void encode(const std::filesystem::path& corpus, std::size_t l,
              const std::filesystem::path& out);

  std::vector<SearchHit> query(std::string_view text, const QueryOptions& options);

  /// Evaluates the configured variant and the LSH baseline on the test
  /// corpus for every configured width; writes eval_<variant>.csv and
  /// eval_lsh.csv to the model directory.
  struct EvalOutput {
    EvalReport method;
    EvalReport lsh;
  };
  EvalOutput eval();

  static std::filesystem::path width_dir(const std::filesystem::path& model_dir, std::size_t l);

 private:
  const Corpus& training_corpus();
  const TopicModelBank& bank();
  const SelectionResult& selection();
  std::vector<const TopicModel*> selected_models();
  const ThetaTable& training_thetas();
  void ensure_width(std::size_t l, std::size_t widest);
  Corpus load_with_vocab(const std::filesystem::path& path);
  void write_manifest();

  PipelineConfig config_;
  std::optional<Corpus> corpus_;
  std::optional<TopicModelBank> bank_;
  std::optional<SelectionResult> selection_;
  std::optional<ThetaTable> thetas_;
  std::optional<FeaCodes> fea_cache_;  // embedding at the widest requested width
};

}  // namespace mthash
