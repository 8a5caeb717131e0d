#include "decsal/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "decsal/checkpoint.hpp"
#include "decsal/dataset.hpp"
#include "decsal/errors.hpp"
#include "decsal/evaluation.hpp"
#include "decsal/parallel.hpp"
#include "decsal/report.hpp"
#include "decsal/saliency.hpp"
#include "decsal/synthetic.hpp"
#include "decsal/train.hpp"
#include "json.hpp"

namespace decsal {

namespace {

namespace fs = std::filesystem;

struct Paths {
  fs::path out;
  fs::path vocab() const { return out / "vocabulary.json"; }
  fs::path pretrained() const { return out / "pretrained.ckpt"; }
  fs::path pretrain_log() const { return out / "pretrain_log.json"; }
  fs::path finetuned() const { return out / "finetuned.ckpt"; }
  fs::path finetune_log() const { return out / "finetune_log.json"; }
  fs::path saliency_dir() const { return out / "saliency"; }
  fs::path curves() const { return out / "curves.csv"; }
  fs::path auc_table() const { return out / "auc.csv"; }
  fs::path rankings() const { return out / "rankings.json"; }
  fs::path overlap_file() const { return out / "overlap.json"; }
  fs::path report_dir() const { return out / "report"; }
  fs::path manifest() const { return out / "manifest.json"; }
};

Paths paths_for(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.io.out_dir);
  return Paths{cfg.io.out_dir};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string input_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "input_%05zu.json", index);
  return buf;
}

struct ExplainerSpec {
  std::string name;
  SaliencyRequest request;
};

std::vector<ExplainerSpec> explainer_specs(const ExperimentConfig& cfg) {
  std::vector<ExplainerSpec> specs;
  for (SaliencyMethod method : cfg.saliency.methods) {
    for (std::size_t layer : cfg.saliency.layers) {
      SaliencyRequest req;
      req.layer = layer;
      req.method = method;
      req.tau = cfg.saliency.tau;
      req.per_term_relu = cfg.saliency.per_term_relu;
      specs.push_back({explainer_name(method, layer, false), req});
    }
    if (cfg.saliency.include_vanilla) {
      SaliencyRequest req;
      req.layer = 0;
      req.method = method;
      req.identity_decoder = true;
      specs.push_back({explainer_name(method, 0, true), req});
    }
  }
  return specs;
}

std::vector<LabelledSeq> encode_labelled(const Dataset& data, const Vocabulary& vocab,
                                         std::size_t n_max) {
  std::vector<LabelledSeq> out;
  out.reserve(data.size());
  for (const auto& r : data.records) out.push_back({encode(vocab, r.text, n_max), r.label});
  return out;
}

double accuracy_on(const Model& m, const std::vector<LabelledSeq>& data) {
  std::vector<std::uint8_t> correct(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    correct[i] = m.forward(data[i].seq).predicted_class() == data[i].label ? 1 : 0;
  });
  double acc = 0.0;
  for (auto c : correct) acc += c;
  return acc / static_cast<double>(data.size());
}

}  // namespace

std::string explainer_name(SaliencyMethod method, std::size_t layer, bool identity) {
  if (identity) return method_name(method) + "_l0";
  return "decoded_" + method_name(method) + "_l" + std::to_string(layer);
}

void stage_vocab(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  Dataset train = ingest(cfg.io.train_path);
  Vocabulary vocab =
      build_vocab_from_texts(train.texts(), cfg.model.vocab_max, cfg.model.vocab_min_freq);
  vocab.save(paths.vocab());
}

void stage_pretrain(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  Vocabulary vocab = Vocabulary::load(paths.vocab());
  Dataset train = ingest(cfg.io.train_path);
  const std::size_t classes = train.class_count();
  Model model = init_model(cfg.model_config(vocab.size(), classes));

  std::vector<TokenSeq> corpus;
  corpus.reserve(train.size());
  for (const auto& r : train.records) corpus.push_back(encode(vocab, r.text, cfg.model.n_max));

  MlmOptions opts;
  opts.epochs = cfg.training.pretrain_epochs;
  opts.lr = cfg.training.pretrain_lr;
  opts.mask_rate = cfg.training.mask_rate;
  opts.keep_rate = cfg.training.mask_keep_rate;
  opts.random_rate = cfg.training.mask_random_rate;
  opts.batch_size = cfg.training.batch_size;
  opts.seed = cfg.io.seed;
  MlmReport report = pretrain_mlm(model, corpus, opts);

  save_checkpoint(model, paths.pretrained());
  nlohmann::ordered_json log{{"epoch_loss", report.epoch_loss}};
  write_text(paths.pretrain_log(), log.dump(2) + "\n");
}

void stage_finetune(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  Vocabulary vocab = Vocabulary::load(paths.vocab());
  Model model = load_checkpoint(paths.pretrained());
  Dataset train = ingest(cfg.io.train_path);
  Dataset validation = ingest(cfg.io.validation_path);

  auto train_seqs = encode_labelled(train, vocab, cfg.model.n_max);
  FinetuneOptions opts;
  opts.epochs = cfg.training.finetune_epochs;
  opts.lr = cfg.training.finetune_lr;
  opts.batch_size = cfg.training.batch_size;
  opts.seed = cfg.io.seed + 1;
  opts.freeze_base = cfg.training.freeze_base;
  FinetuneReport report = finetune_classifier(model, train_seqs, opts);

  const double val_acc = accuracy_on(model, encode_labelled(validation, vocab, cfg.model.n_max));
  save_checkpoint(model, paths.finetuned());
  nlohmann::ordered_json log{{"epoch_loss", report.epoch_loss},
                             {"epoch_accuracy", report.epoch_accuracy},
                             {"validation_accuracy", val_acc}};
  write_text(paths.finetune_log(), log.dump(2) + "\n");
}

void stage_explain(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  Vocabulary vocab = Vocabulary::load(paths.vocab());
  Model model = load_checkpoint(paths.finetuned());
  // Explanations never see labels: only the text column is read.
  const std::vector<std::string> texts = ingest(cfg.io.test_path).texts();
  const auto specs = explainer_specs(cfg);
  for (const auto& spec : specs) fs::create_directories(paths.saliency_dir() / spec.name);

  parallel_for(texts.size(), [&](std::size_t i) {
    TokenSeq seq = encode(vocab, texts[i], cfg.model.n_max);
    ForwardTrace trace = model.forward(seq);
    for (const auto& spec : specs) {
      SaliencyResult result = decoded_saliency_on(model, trace, seq, spec.request);
      nlohmann::ordered_json j = saliency_to_json(result, vocab);
      write_text(paths.saliency_dir() / spec.name / input_file_name(i), j.dump(2) + "\n");
    }
  });
}

void stage_game(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  Vocabulary vocab = Vocabulary::load(paths.vocab());
  Model model = load_checkpoint(paths.finetuned());
  Dataset test = ingest(cfg.io.test_path);
  auto labelled = encode_labelled(test, vocab, cfg.model.n_max);

  std::vector<EvalCurve> curves;
  std::vector<AucRow> auc_rows;
  auto run_explainer = [&](const std::string& name, const std::vector<GameInput>& inputs) {
    EvalCurve hide = hiding_curve(model, inputs, cfg.evaluation.fractions, name);
    EvalCurve reveal = revealing_curve(model, inputs, cfg.evaluation.fractions, name);
    auc_rows.push_back({name, auc(reveal), auc(hide)});
    curves.push_back(std::move(hide));
    curves.push_back(std::move(reveal));
  };

  for (const auto& spec : explainer_specs(cfg)) {
    std::vector<GameInput> inputs(labelled.size());
    for (std::size_t i = 0; i < labelled.size(); ++i) {
      const fs::path file = paths.saliency_dir() / spec.name / input_file_name(i);
      LoadedExplanation expl = explanation_from_json(nlohmann::json::parse(read_text(file)));
      inputs[i].seq = labelled[i].seq;
      inputs[i].label = labelled[i].label;
      inputs[i].scores = expl.position_scores;
    }
    run_explainer(spec.name, inputs);
  }

  if (!cfg.io.ground_truth.empty()) {
    GroundTruthFile truth = load_ground_truth(cfg.io.ground_truth);
    if (truth.test.size() != labelled.size()) {
      throw DataError("game: ground truth lists " + std::to_string(truth.test.size()) +
                      " test rows, dataset has " + std::to_string(labelled.size()));
    }
    std::vector<GameInput> inputs(labelled.size());
    for (std::size_t i = 0; i < labelled.size(); ++i) {
      inputs[i].seq = labelled[i].seq;
      inputs[i].label = labelled[i].label;
      inputs[i].scores.assign(labelled[i].seq.ids.size(), 0.0);
      const std::size_t pos = truth.test[i].word_index + 1;  // CLS occupies position 0
      if (pos < labelled[i].seq.ids.size() && !Vocabulary::is_special(labelled[i].seq.ids[pos])) {
        inputs[i].scores[pos] = 1.0;
      }
    }
    run_explainer("oracle", inputs);
  }

  CurvePair random = random_baseline(model, labelled, cfg.evaluation.fractions,
                                     cfg.evaluation.random_trials, cfg.io.seed + 2);
  auc_rows.push_back({"random", auc(random.revealing), auc(random.hiding)});
  curves.push_back(std::move(random.hiding));
  curves.push_back(std::move(random.revealing));

  write_text(paths.curves(), curves_csv(curves));
  write_text(paths.auc_table(), auc_csv(auc_rows));
}

void stage_overlap(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  const std::size_t classes = load_checkpoint(paths.finetuned()).config().classes;
  const std::size_t n_test = ingest(cfg.io.test_path).size();
  const std::vector<std::string> reference = [&] {
    std::vector<std::string> docs;
    std::istringstream in(read_text(cfg.evaluation.reference_corpus));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) docs.push_back(line);
    }
    return docs;
  }();
  IdfTable idf = build_idf(reference);

  auto specs = explainer_specs(cfg);
  std::map<std::string, std::vector<ExplanationRecord>> records;
  for (const auto& spec : specs) {
    auto& recs = records[spec.name];
    for (std::size_t i = 0; i < n_test; ++i) {
      const fs::path file = paths.saliency_dir() / spec.name / input_file_name(i);
      LoadedExplanation expl = explanation_from_json(nlohmann::json::parse(read_text(file)));
      ExplanationRecord rec;
      rec.predicted_class = expl.predicted_class;
      for (std::size_t t = 0; t < expl.tokens.size(); ++t) {
        rec.token_scores.emplace_back(expl.tokens[t], expl.scores[t]);
      }
      recs.push_back(std::move(rec));
    }
  }

  nlohmann::ordered_json rankings_json_all = nlohmann::ordered_json::object();
  nlohmann::ordered_json overlap_json_all = nlohmann::ordered_json::object();
  for (const auto& spec : specs) {
    auto rankings = class_token_ranking(records[spec.name], idf, classes);
    rankings_json_all[spec.name] = rankings_to_json(rankings);
    std::vector<OverlapReport> reports;
    for (std::size_t k : cfg.evaluation.k_list) reports.push_back(overlap(rankings, k));
    overlap_json_all[spec.name] = overlap_to_json(reports, spec.name);
  }
  write_text(paths.rankings(), rankings_json_all.dump(2) + "\n");
  write_text(paths.overlap_file(), overlap_json_all.dump(2) + "\n");
}

void stage_report(const ExperimentConfig& cfg) {
  Paths paths = paths_for(cfg);
  fs::create_directories(paths.report_dir());
  const auto curves = parse_curves_csv(read_text(paths.curves()));
  for (Game game : {Game::kHiding, Game::kRevealing}) {
    std::vector<SvgSeries> series;
    for (const auto& c : curves) {
      if (c.game != game) continue;
      series.push_back({c.explainer, c.points});
    }
    const std::string title = game == Game::kHiding ? "Hiding game" : "Revealing game";
    const std::string x_label =
        game == Game::kHiding ? "fraction of tokens hidden" : "fraction of tokens revealed";
    const std::string svg = curves_svg(title, x_label, series);
    std::string error;
    if (!xml_well_formed(svg, &error)) throw NumericError("report: bad svg: " + error);
    write_text(paths.report_dir() / (game_name(game) + ".svg"), svg);
  }

  Vocabulary vocab = Vocabulary::load(paths.vocab());
  const std::vector<std::string> texts = ingest(cfg.io.test_path).texts();
  for (const auto& spec : explainer_specs(cfg)) {
    std::vector<HighlightSample> samples;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const fs::path file = paths.saliency_dir() / spec.name / input_file_name(i);
      LoadedExplanation expl = explanation_from_json(nlohmann::json::parse(read_text(file)));
      TokenSeq seq = encode(vocab, texts[i], cfg.model.n_max);
      HighlightSample sample;
      for (std::size_t p = 0; p < seq.ids.size(); ++p) {
        sample.tokens.push_back(vocab.token(seq.ids[p]));
        sample.is_content.push_back(Vocabulary::is_special(seq.ids[p]) ? 0 : 1);
      }
      sample.scores = expl.position_scores;
      sample.predicted_class = expl.predicted_class;
      sample.class_prob = expl.class_prob;
      samples.push_back(std::move(sample));
    }
    const std::string html = highlights_html("Saliency highlights: " + spec.name, samples);
    std::string error;
    if (!xml_well_formed(html, &error)) throw NumericError("report: bad html: " + error);
    write_text(paths.report_dir() / ("highlights_" + spec.name + ".html"), html);
  }
}

void run_experiment(const ExperimentConfig& cfg, const std::string& config_hash) {
  Paths paths = paths_for(cfg);
  struct StageEntry {
    const char* name;
    void (*body)(const ExperimentConfig&);
    std::string status = "pending";
  };
  std::vector<StageEntry> stages{
      {"vocab", stage_vocab},     {"pretrain", stage_pretrain}, {"finetune", stage_finetune},
      {"explain", stage_explain}, {"game", stage_game},         {"overlap", stage_overlap},
      {"report", stage_report},
  };
  auto write_manifest = [&](bool complete) {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["seed"] = cfg.io.seed;
    j["complete"] = complete;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& s : stages) list.push_back({{"name", s.name}, {"status", s.status}});
    j["stages"] = std::move(list);
    write_text(paths.manifest(), j.dump(2) + "\n");
  };

  for (auto& stage : stages) {
    const std::string prefix = "stage '" + std::string(stage.name) + "' failed: ";
    try {
      stage.body(cfg);
      stage.status = "ok";
      write_manifest(false);
    } catch (const ConfigError& e) {
      stage.status = "failed";
      write_manifest(false);
      throw ConfigError(prefix + e.what());
    } catch (const NumericError& e) {
      stage.status = "failed";
      write_manifest(false);
      throw NumericError(prefix + e.what());
    } catch (const std::exception& e) {
      stage.status = "failed";
      write_manifest(false);
      throw DataError(prefix + e.what());
    }
  }
  write_manifest(true);
}

}  // namespace decsal
