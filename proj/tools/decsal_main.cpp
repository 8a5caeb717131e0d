#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "decsal/config.hpp"
#include "decsal/dataset.hpp"
#include "decsal/errors.hpp"
#include "decsal/experiment.hpp"
#include "decsal/synthetic.hpp"

namespace fs = std::filesystem;
using namespace decsal;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::size_t> layers;
  std::optional<std::string> method;
  std::optional<std::size_t> tau;
  std::optional<std::size_t> k;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config (TOML)");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "override io.seed");
  cmd->add_option("--out", flags.out, "override io.out");
  cmd->add_option("--layer", flags.layers, "override saliency layers (repeatable)");
  cmd->add_option("--method", flags.method, "override saliency method")
      ->check(CLI::IsMember({"gradcam", "simple"}));
  cmd->add_option("--tau", flags.tau, "override saliency tau");
  cmd->add_option("--k", flags.k, "override the overlap k list with one value");
}

ExperimentConfig config_from(const CommonFlags& flags) {
  ExperimentConfig cfg = load_config(flags.config_path);
  if (flags.seed) cfg.io.seed = *flags.seed;
  if (flags.out) cfg.io.out_dir = *flags.out;
  if (!flags.layers.empty()) {
    cfg.saliency.layers = flags.layers;
    for (std::size_t l : cfg.saliency.layers) {
      if (l > cfg.model.layers) throw ConfigError("--layer exceeds model.layers");
    }
  }
  if (flags.method) cfg.saliency.methods = {method_from_name(*flags.method)};
  if (flags.tau) cfg.saliency.tau = *flags.tau;
  if (flags.k) cfg.evaluation.k_list = {*flags.k};
  return cfg;
}

struct SynthFlags {
  std::string out_dir = "data";
  std::string mode = "classification";
  std::size_t classes = 4;
  std::size_t planted_per_class = 1;
  std::size_t vocab_content = 150;
  std::size_t seq_len = 10;
  std::size_t n_train = 2000;
  std::size_t n_validation = 200;
  std::size_t n_test = 400;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_sequences = 2000;
};

void run_synth(const SynthFlags& flags) {
  fs::create_directories(flags.out_dir);
  const fs::path out(flags.out_dir);
  if (flags.mode == "lm") {
    ChainCorpusOptions opts;
    opts.vocab_content = flags.vocab_content;
    opts.seq_len = flags.seq_len;
    opts.n_sequences = flags.n_sequences;
    opts.seed = flags.seed;
    std::ofstream corpus(out / "corpus.txt");
    if (!corpus) throw DataError("synth: cannot write " + (out / "corpus.txt").string());
    for (const auto& line : generate_chain_corpus(opts)) corpus << line << "\n";
    return;
  }
  SyntheticOptions opts;
  opts.classes = flags.classes;
  opts.planted_per_class = flags.planted_per_class;
  opts.vocab_content = flags.vocab_content;
  opts.seq_len = flags.seq_len;
  opts.n_train = flags.n_train;
  opts.n_validation = flags.n_validation;
  opts.n_test = flags.n_test;
  opts.noise_rate = flags.noise_rate;
  opts.seed = flags.seed;
  SyntheticDataset data = generate_synthetic(opts);
  write_jsonl(data.train, out / "train.jsonl");
  write_jsonl(data.validation, out / "validation.jsonl");
  write_jsonl(data.test, out / "test.jsonl");
  write_ground_truth(data, out / "ground_truth.json");
  std::ofstream reference(out / "reference.txt");
  if (!reference) throw DataError("synth: cannot write reference corpus");
  for (const auto& r : data.train.records) reference << r.text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoded layer saliency toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  SynthFlags synth_flags;

  auto* synth = app.add_subcommand("synth", "generate synthetic datasets");
  synth->add_option("--out", synth_flags.out_dir, "output directory");
  synth->add_option("--mode", synth_flags.mode, "classification | lm")
      ->check(CLI::IsMember({"classification", "lm"}));
  synth->add_option("--classes", synth_flags.classes, "class count");
  synth->add_option("--planted-per-class", synth_flags.planted_per_class, "planted tokens/class");
  synth->add_option("--vocab-content", synth_flags.vocab_content, "content vocabulary size");
  synth->add_option("--seq-len", synth_flags.seq_len, "content words per sample");
  synth->add_option("--train", synth_flags.n_train, "training samples");
  synth->add_option("--validation", synth_flags.n_validation, "validation samples");
  synth->add_option("--test", synth_flags.n_test, "test samples");
  synth->add_option("--noise", synth_flags.noise_rate, "label flip rate");
  synth->add_option("--seed", synth_flags.seed, "generator seed");
  synth->add_option("--sequences", synth_flags.n_sequences, "lm mode: corpus lines");

  auto* vocab = app.add_subcommand("vocab", "build the vocabulary from the training split");
  auto* pretrain = app.add_subcommand("pretrain", "masked-language-model pretraining");
  auto* finetune = app.add_subcommand("finetune", "classifier fine-tuning (LM head frozen)");
  auto* explain = app.add_subcommand("explain", "write per-input saliency JSON (no labels used)");
  auto* game = app.add_subcommand("game", "hiding/revealing curves and AUC table");
  auto* overlap_cmd = app.add_subcommand("overlap", "class token rankings and overlap report");
  auto* report = app.add_subcommand("report", "SVG curves and HTML highlight pages");
  auto* run = app.add_subcommand("run", "full pipeline with manifest");
  for (CLI::App* cmd : {vocab, pretrain, finetune, explain, game, overlap_cmd, report, run}) {
    add_common(cmd, flags);
  }

  try {
    app.parse(argc, argv);
    if (synth->parsed()) {
      run_synth(synth_flags);
      return 0;
    }
    ExperimentConfig cfg = config_from(flags);
    if (vocab->parsed()) stage_vocab(cfg);
    if (pretrain->parsed()) stage_pretrain(cfg);
    if (finetune->parsed()) stage_finetune(cfg);
    if (explain->parsed()) stage_explain(cfg);
    if (game->parsed()) stage_game(cfg);
    if (overlap_cmd->parsed()) stage_overlap(cfg);
    if (report->parsed()) stage_report(cfg);
    if (run->parsed()) run_experiment(cfg, config_hash_hex(flags.config_path));
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
