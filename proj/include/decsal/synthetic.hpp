#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decsal/dataset.hpp"

namespace decsal {

struct SyntheticOptions {
  std::size_t classes = 4;
  std::size_t planted_per_class = 1;
  std::size_t vocab_content = 150;  // total content vocabulary, planted included
  std::size_t seq_len = 10;         // content words per sample
  std::size_t n_train = 2000;
  std::size_t n_validation = 200;
  std::size_t n_test = 400;
  double noise_rate = 0.0;  // chance a sample's label is flipped
  std::uint64_t seed = 0;
};

struct PlantedTruth {
  std::string planted_token;
  std::size_t word_index = 0;  // position within the whitespace-split text
};

struct SyntheticDataset {
  Dataset train, validation, test;
  std::vector<PlantedTruth> train_truth, validation_truth, test_truth;
  std::vector<std::vector<std::string>> planted_tokens;  // per class, disjoint
};

/// Each sample is uniform distractor words plus exactly one planted token of
/// its class at a random position; the truth records that position.
SyntheticDataset generate_synthetic(const SyntheticOptions& opts);

void write_ground_truth(const SyntheticDataset& data, const std::filesystem::path& path);

struct GroundTruthFile {
  std::vector<std::vector<std::string>> planted_tokens;
  std::vector<PlantedTruth> train, validation, test;
};
GroundTruthFile load_ground_truth(const std::filesystem::path& path);

struct ChainCorpusOptions {
  std::size_t vocab_content = 120;
  std::size_t seq_len = 12;
  std::size_t n_sequences = 2000;
  std::uint64_t seed = 0;
};

/// Sequences that follow a fixed random successor permutation over the
/// content words: every token is recoverable from either neighbor, which
/// makes masked-token prediction learnable at desk scale.
std::vector<std::string> generate_chain_corpus(const ChainCorpusOptions& opts);

}  // namespace decsal
