#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "decsal/model.hpp"
#include "decsal/saliency.hpp"

namespace decsal {

struct TrainingSection {
  std::size_t pretrain_epochs = 30;
  double pretrain_lr = 1e-3;
  double mask_rate = 0.15;
  double mask_keep_rate = 0.0;
  double mask_random_rate = 0.0;
  std::size_t finetune_epochs = 10;
  double finetune_lr = 1e-4;
  std::size_t batch_size = 16;
  bool freeze_base = false;
};

struct SaliencySection {
  std::vector<std::size_t> layers;  // default: last two blocks
  std::vector<SaliencyMethod> methods{SaliencyMethod::kGradCam};
  std::optional<std::size_t> tau;  // unset: tau = T per input
  bool per_term_relu = false;
  bool include_vanilla = true;  // add the layer-0 identity-decoder baseline
};

struct EvaluationSection {
  std::vector<double> fractions;  // default: 0, 0.05, ..., 1
  std::size_t random_trials = 20;
  std::vector<std::size_t> k_list{5, 10, 20, 50};
  std::filesystem::path reference_corpus;
};

struct IoSection {
  std::filesystem::path train_path;
  std::filesystem::path validation_path;
  std::filesystem::path test_path;
  std::filesystem::path ground_truth;  // optional oracle for the games
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
};

struct ModelSection {
  std::size_t vocab_max = 2048;
  std::size_t vocab_min_freq = 1;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t layers = 4;
  std::size_t n_max = 32;
  bool tie_lm_embedding = false;
};

struct ExperimentConfig {
  ModelSection model;
  TrainingSection training;
  SaliencySection saliency;
  EvaluationSection evaluation;
  IoSection io;

  // Classes come from the training data at run time.
  ModelConfig model_config(std::size_t vocab_size, std::size_t classes) const;
};

// Strict load: unknown sections or keys are rejected, numeric ranges are
// checked, and every referenced input path must exist.
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a over the raw file bytes; changes iff the file changes.
std::string config_hash_hex(const std::filesystem::path& path);

}  // namespace decsal
