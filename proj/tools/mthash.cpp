// Command-line front end: corpus generation, training, encoding, querying and
// evaluation on a model directory.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mthash/error.hpp"
#include "mthash/pipeline.hpp"
#include "mthash/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mthash;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string model_dir;
  std::string bits;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config, "key=value configuration file");
  cmd->add_option("-s,--set", o.overrides, "override one key, e.g. --set bits=4:4:64")->take_all();
  cmd->add_option("-m,--model-dir", o.model_dir, "model directory (overrides MTHASH_MODEL_DIR)");
  cmd->add_option("-b,--bits", o.bits, "bit widths, e.g. 8 or 4:4:64");
}

// Config file (or the one saved in the model directory), then the
// environment, then flags.
PipelineConfig resolve_config(const CommonOptions& o) {
  PipelineConfig cfg;
  std::string dir = o.model_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("MTHASH_MODEL_DIR"); env && *env) dir = env;
  }
  if (!o.config.empty()) {
    cfg = PipelineConfig::load(o.config);
  } else {
    const fs::path saved = fs::path(dir.empty() ? cfg.model_dir : dir) / "config.txt";
    if (fs::exists(saved)) cfg = PipelineConfig::load(saved);
  }
  if (!dir.empty()) cfg.model_dir = dir;
  for (const auto& kv : o.overrides) cfg.apply_override(kv);
  if (!o.bits.empty()) cfg.set("bits", o.bits);
  cfg.validate();
  return cfg;
}

void print_hits(const std::vector<SearchHit>& hits) {
  for (const auto& h : hits) std::printf("%zu\t%d\n", h.id, h.distance);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-text hashing with multi-granularity topics"};
  app.require_subcommand(1);

  SyntheticParams gen;
  std::string gen_out, gen_test_out, gen_level = "coarse";
  auto* cmd_gen = app.add_subcommand("gen", "write a planted two-level synthetic corpus");
  cmd_gen->add_option("--n", gen.n, "training documents");
  cmd_gen->add_option("--n-test", gen.n_test, "test documents");
  cmd_gen->add_option("--tags", gen_level, "tag level: coarse or fine");
  cmd_gen->add_option("--coarse", gen.coarse_topics, "coarse topics");
  cmd_gen->add_option("--fine", gen.fine_topics, "fine topics (a multiple of --coarse)");
  cmd_gen->add_option("--vocab", gen.vocab, "vocabulary size");
  cmd_gen->add_option("--min-len", gen.min_len, "shortest document");
  cmd_gen->add_option("--max-len", gen.max_len, "longest document");
  cmd_gen->add_option("--coarse-share", gen.coarse_share, "token share of coarse-topic words");
  cmd_gen->add_option("--fine-share", gen.fine_share, "token share of fine-topic words");
  cmd_gen->add_option("--facets", gen.facets, "label-independent facets");
  cmd_gen->add_option("--facet-share", gen.facet_share, "token share of facet words");
  cmd_gen->add_option("--seed", gen.seed, "random seed");
  cmd_gen->add_option("-o,--out", gen_out, "training corpus output (JSONL)")->required();
  cmd_gen->add_option("--test-out", gen_test_out, "test corpus output (JSONL)");

  CommonOptions common;
  auto* cmd_topics = app.add_subcommand("train-topics", "train the topic model bank");
  auto* cmd_select = app.add_subcommand("select", "score granularities and pick the top M");
  auto* cmd_train = app.add_subcommand("train", "learn codes and hash functions for every bit width");
  for (auto* c : {cmd_topics, cmd_select, cmd_train}) add_common(c, common);

  std::string enc_corpus, enc_out;
  std::size_t enc_bits = 0;
  auto* cmd_encode = app.add_subcommand("encode", "encode a corpus into a codes file");
  add_common(cmd_encode, common);
  cmd_encode->add_option("--corpus", enc_corpus, "corpus to encode")->required();
  cmd_encode->add_option("-l,--width", enc_bits, "bit width (default: first configured)");
  cmd_encode->add_option("-o,--out", enc_out, "codes output")->required();

  std::string query_text;
  std::size_t query_bits = 0;
  std::optional<int> query_radius;
  std::optional<std::size_t> query_topk;
  auto* cmd_query = app.add_subcommand("query", "print training ids near a query text");
  add_common(cmd_query, common);
  cmd_query->add_option("-t,--text", query_text, "query text")->required();
  cmd_query->add_option("-l,--width", query_bits, "bit width (default: first configured)");
  auto* opt_r = cmd_query->add_option("-r,--radius", query_radius, "Hamming radius");
  auto* opt_k = cmd_query->add_option("-k,--top-k", query_topk, "number of nearest codes");
  opt_r->excludes(opt_k);

  auto* cmd_eval = app.add_subcommand("eval", "evaluate against the test corpus and write CSV reports");
  add_common(cmd_eval, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (cmd_gen->parsed()) {
      gen.tag_level = parse_tag_level(gen_level);
      auto corpus = gen_synthetic(gen);
      std::ofstream out(gen_out, std::ios::binary);
      if (!out) throw IoError("cannot write " + gen_out);
      write_jsonl(corpus.train, out);
      if (!gen_test_out.empty()) {
        std::ofstream test(gen_test_out, std::ios::binary);
        if (!test) throw IoError("cannot write " + gen_test_out);
        write_jsonl(corpus.test, test);
      } else if (!corpus.test.empty()) {
        throw InvalidArgument("--n-test needs --test-out");
      }
      return 0;
    }

    PipelineConfig cfg;
    try {
      cfg = resolve_config(common);
    } catch (const Error& e) {
      std::fprintf(stderr, "mthash: config: %s\n", e.what());
      return kExitConfig;
    }
    Pipeline pipeline(cfg);
    if (cmd_topics->parsed()) {
      pipeline.train_topics();
    } else if (cmd_select->parsed()) {
      pipeline.select();
      const auto sel = SelectionResult::load(pipeline.model_dir() / "selection.txt");
      for (std::size_t i = 0; i < sel.M(); ++i) std::printf("K=%d\tmu_hat=%.6f\n", sel.Ks[i], sel.mu_hat[i]);
    } else if (cmd_train->parsed()) {
      pipeline.train();
    } else if (cmd_encode->parsed()) {
      pipeline.encode(enc_corpus, enc_bits ? enc_bits : cfg.bits.front(), enc_out);
    } else if (cmd_query->parsed()) {
      print_hits(pipeline.query(query_text, {query_bits, query_radius, query_topk}));
    } else if (cmd_eval->parsed()) {
      auto out = pipeline.eval();
      std::printf("# %s\n", std::string(variant_name(cfg.variant)).c_str());
      out.method.write_csv(std::cout);
      std::printf("# lsh\n");
      out.lsh.write_csv(std::cout);
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "mthash: %s\n", e.what());
    return kExitStage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "mthash: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mthash: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
