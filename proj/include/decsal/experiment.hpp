#pragma once

#include <filesystem>
#include <string>

#include "decsal/config.hpp"

namespace decsal {

// Stage outputs under cfg.io.out_dir; each stage reads its inputs from the
// files earlier stages wrote, so subcommands can run stages standalone.
void stage_vocab(const ExperimentConfig& cfg);
void stage_pretrain(const ExperimentConfig& cfg);
void stage_finetune(const ExperimentConfig& cfg);
void stage_explain(const ExperimentConfig& cfg);
void stage_game(const ExperimentConfig& cfg);
void stage_overlap(const ExperimentConfig& cfg);
void stage_report(const ExperimentConfig& cfg);

// Full pipeline with a manifest; aborts on the first failing stage, naming
// it, and flags the partial run in the manifest.
void run_experiment(const ExperimentConfig& cfg, const std::string& config_hash);

// Explainer directory/legend names, e.g. "decoded_gradcam_l3", "gradcam_l0".
std::string explainer_name(SaliencyMethod method, std::size_t layer, bool identity);

}  // namespace decsal
