#include "decsal/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "decsal/errors.hpp"
#include "decsal/evaluation.hpp"
#include "decsal/toml.hpp"

namespace decsal {

ModelConfig ExperimentConfig::model_config(std::size_t vocab_size, std::size_t classes) const {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.hidden = model.hidden;
  cfg.heads = model.heads;
  cfg.layers = model.layers;
  cfg.n_max = model.n_max;
  cfg.classes = classes;
  cfg.seed = io.seed;
  cfg.tie_lm_embedding = model.tie_lm_embedding;
  cfg.validate();
  return cfg;
}

namespace {

class SectionReader {
 public:
  SectionReader(const TomlTable& table, const std::string& section)
      : section_(section) {
    auto it = table.find(section);
    if (it != table.end()) values_ = &it->second;
  }

  bool has(const std::string& key) const { return values_ && values_->count(key) > 0; }

  const TomlValue& get(const std::string& key) {
    used_.insert(key);
    return values_->at(key);
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = get(key);
    if (v.kind != TomlValue::Kind::kInteger) type_error(key, v, "integer");
    return v.integer;
  }

  double get_float(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = get(key);
    if (v.kind == TomlValue::Kind::kInteger) return static_cast<double>(v.integer);
    if (v.kind != TomlValue::Kind::kFloat) type_error(key, v, "float");
    return v.number;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = get(key);
    if (v.kind != TomlValue::Kind::kBoolean) type_error(key, v, "boolean");
    return v.boolean;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const TomlValue& v = get(key);
    if (v.kind != TomlValue::Kind::kString) type_error(key, v, "string");
    return v.str;
  }

  std::vector<TomlValue> get_array(const std::string& key) {
    const TomlValue& v = get(key);
    if (v.kind != TomlValue::Kind::kArray) type_error(key, v, "array");
    return v.array;
  }

  void finish() const {
    if (!values_) return;
    for (const auto& [key, value] : *values_) {
      if (!used_.count(key)) {
        throw ConfigError("config: unknown key '" + key + "' in [" + section_ + "]");
      }
    }
  }

 private:
  [[noreturn]] void type_error(const std::string& key, const TomlValue& v,
                               const char* want) const {
    throw ConfigError("config: [" + section_ + "] " + key + " must be a " + want + ", got " +
                      v.type_name());
  }

  std::string section_;
  const std::map<std::string, TomlValue>* values_ = nullptr;
  std::set<std::string> used_;
};

std::size_t positive(std::int64_t v, const char* what) {
  if (v < 1) throw ConfigError(std::string("config: ") + what + " must be positive");
  return static_cast<std::size_t>(v);
}

void require_exists(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("config: ") + what + " is required");
  if (!std::filesystem::exists(p)) {
    throw ConfigError(std::string("config: ") + what + " does not exist: " + p.string());
  }
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  TomlTable table = parse_toml_file(path);
  const std::set<std::string> known_sections{"", "model", "training", "saliency", "evaluation",
                                             "io"};
  for (const auto& [section, values] : table) {
    if (!known_sections.count(section)) {
      throw ConfigError("config: unknown section [" + section + "]");
    }
    if (section.empty() && !values.empty()) {
      throw ConfigError("config: top-level key '" + values.begin()->first +
                        "' must live in a section");
    }
  }

  ExperimentConfig cfg;
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&base](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  {
    SectionReader model(table, "model");
    cfg.model.vocab_max = positive(model.get_int("vocab_max", 2048), "model.vocab_max");
    cfg.model.vocab_min_freq =
        positive(model.get_int("vocab_min_freq", 1), "model.vocab_min_freq");
    cfg.model.hidden = positive(model.get_int("hidden", 64), "model.hidden");
    cfg.model.heads = positive(model.get_int("heads", 4), "model.heads");
    cfg.model.layers = positive(model.get_int("layers", 4), "model.layers");
    cfg.model.n_max = positive(model.get_int("n_max", 32), "model.n_max");
    cfg.model.tie_lm_embedding = model.get_bool("tie_lm_embedding", false);
    if (cfg.model.hidden % cfg.model.heads != 0) {
      throw ConfigError("config: model.hidden must be divisible by model.heads");
    }
    if (cfg.model.n_max < 3) throw ConfigError("config: model.n_max must be at least 3");
    model.finish();
  }

  {
    SectionReader training(table, "training");
    cfg.training.pretrain_epochs =
        static_cast<std::size_t>(training.get_int("pretrain_epochs", 30));
    cfg.training.pretrain_lr = training.get_float("pretrain_lr", 1e-3);
    cfg.training.mask_rate = training.get_float("mask_rate", 0.15);
    cfg.training.mask_keep_rate = training.get_float("mask_keep_rate", 0.0);
    cfg.training.mask_random_rate = training.get_float("mask_random_rate", 0.0);
    cfg.training.finetune_epochs =
        static_cast<std::size_t>(training.get_int("finetune_epochs", 10));
    cfg.training.finetune_lr = training.get_float("finetune_lr", 1e-4);
    cfg.training.batch_size = positive(training.get_int("batch_size", 16), "training.batch_size");
    cfg.training.freeze_base = training.get_bool("freeze_base", false);
    if (!(cfg.training.mask_rate > 0.0 && cfg.training.mask_rate < 1.0)) {
      throw ConfigError("config: training.mask_rate must lie in (0,1)");
    }
    if (cfg.training.mask_keep_rate < 0.0 || cfg.training.mask_random_rate < 0.0 ||
        cfg.training.mask_keep_rate + cfg.training.mask_random_rate > 1.0) {
      throw ConfigError("config: mask_keep_rate + mask_random_rate must stay within [0,1]");
    }
    if (cfg.training.pretrain_lr <= 0.0 || cfg.training.finetune_lr <= 0.0) {
      throw ConfigError("config: learning rates must be positive");
    }
    training.finish();
  }

  {
    SectionReader saliency(table, "saliency");
    if (saliency.has("layers")) {
      for (const auto& v : saliency.get_array("layers")) {
        if (v.kind != TomlValue::Kind::kInteger || v.integer < 0) {
          throw ConfigError("config: saliency.layers must hold nonnegative integers");
        }
        cfg.saliency.layers.push_back(static_cast<std::size_t>(v.integer));
      }
    } else {
      cfg.saliency.layers = {cfg.model.layers - 1, cfg.model.layers};
    }
    for (std::size_t l : cfg.saliency.layers) {
      if (l > cfg.model.layers) {
        throw ConfigError("config: saliency layer " + std::to_string(l) + " exceeds model.layers");
      }
    }
    if (saliency.has("methods")) {
      cfg.saliency.methods.clear();
      for (const auto& v : saliency.get_array("methods")) {
        if (v.kind != TomlValue::Kind::kString) {
          throw ConfigError("config: saliency.methods must hold strings");
        }
        cfg.saliency.methods.push_back(method_from_name(v.str));
      }
      if (cfg.saliency.methods.empty()) {
        throw ConfigError("config: saliency.methods must not be empty");
      }
    }
    const std::int64_t tau = saliency.get_int("tau", 0);
    if (tau < 0) throw ConfigError("config: saliency.tau must be positive when set");
    if (tau > 0) cfg.saliency.tau = static_cast<std::size_t>(tau);
    cfg.saliency.per_term_relu = saliency.get_bool("per_term_relu", false);
    cfg.saliency.include_vanilla = saliency.get_bool("include_vanilla", true);
    saliency.finish();
  }

  {
    SectionReader evaluation(table, "evaluation");
    if (evaluation.has("fractions")) {
      for (const auto& v : evaluation.get_array("fractions")) {
        const double f = v.kind == TomlValue::Kind::kInteger ? static_cast<double>(v.integer)
                                                             : v.number;
        cfg.evaluation.fractions.push_back(f);
      }
      if (cfg.evaluation.fractions.size() < 2 || cfg.evaluation.fractions.front() != 0.0 ||
          cfg.evaluation.fractions.back() != 1.0) {
        throw ConfigError("config: evaluation.fractions must run from 0 to 1");
      }
    } else {
      cfg.evaluation.fractions = default_fraction_grid();
    }
    cfg.evaluation.random_trials =
        positive(evaluation.get_int("random_trials", 20), "evaluation.random_trials");
    if (evaluation.has("k_list")) {
      cfg.evaluation.k_list.clear();
      for (const auto& v : evaluation.get_array("k_list")) {
        if (v.kind != TomlValue::Kind::kInteger || v.integer < 1) {
          throw ConfigError("config: evaluation.k_list must hold positive integers");
        }
        cfg.evaluation.k_list.push_back(static_cast<std::size_t>(v.integer));
      }
    }
    cfg.evaluation.reference_corpus = resolve(evaluation.get_string("reference_corpus", ""));
    evaluation.finish();
  }

  {
    SectionReader io(table, "io");
    cfg.io.train_path = resolve(io.get_string("train", ""));
    cfg.io.validation_path = resolve(io.get_string("validation", ""));
    cfg.io.test_path = resolve(io.get_string("test", ""));
    cfg.io.ground_truth = resolve(io.get_string("ground_truth", ""));
    cfg.io.out_dir = resolve(io.get_string("out", "out"));
    const std::int64_t seed = io.get_int("seed", 0);
    if (seed < 0) throw ConfigError("config: io.seed must be nonnegative");
    cfg.io.seed = static_cast<std::uint64_t>(seed);
    io.finish();
  }

  require_exists(cfg.io.train_path, "io.train");
  require_exists(cfg.io.validation_path, "io.validation");
  require_exists(cfg.io.test_path, "io.test");
  require_exists(cfg.evaluation.reference_corpus, "evaluation.reference_corpus");
  if (!cfg.io.ground_truth.empty()) require_exists(cfg.io.ground_truth, "io.ground_truth");
  return cfg;
}

std::string config_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) out << ((hash >> shift) & 0xf);
  return out.str();
}

}  // namespace decsal
