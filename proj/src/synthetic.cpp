#include "decsal/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "decsal/errors.hpp"
#include "json.hpp"

namespace decsal {

namespace {

std::string distractor_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03zu", i);
  return buf;
}

struct SplitSink {
  Dataset* data;
  std::vector<PlantedTruth>* truth;
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticOptions& opts) {
  if (opts.classes < 2) throw DataError("synth: need at least two classes");
  if (opts.planted_per_class < 1) throw DataError("synth: need at least one planted token");
  if (opts.seq_len < 1) throw DataError("synth: seq_len must be positive");
  if (opts.noise_rate < 0.0 || opts.noise_rate >= 1.0) {
    throw DataError("synth: noise_rate must lie in [0,1)");
  }
  const std::size_t planted_total = opts.classes * opts.planted_per_class;
  if (opts.vocab_content <= planted_total) {
    throw DataError("synth: vocab_content " + std::to_string(opts.vocab_content) +
                    " is too small for " + std::to_string(planted_total) +
                    " disjoint planted tokens plus distractors");
  }
  const std::size_t n_distractors = opts.vocab_content - planted_total;

  SyntheticDataset out;
  out.planted_tokens.resize(opts.classes);
  for (std::size_t c = 0; c < opts.classes; ++c) {
    for (std::size_t p = 0; p < opts.planted_per_class; ++p) {
      out.planted_tokens[c].push_back("key" + std::to_string(c) + "_" + std::to_string(p));
    }
  }

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<std::size_t> pick_distractor(0, n_distractors - 1);
  std::uniform_int_distribution<std::size_t> pick_planted(0, opts.planted_per_class - 1);
  std::uniform_int_distribution<std::size_t> pick_position(0, opts.seq_len - 1);
  std::uniform_int_distribution<std::size_t> pick_class(0, opts.classes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto emit = [&](SplitSink sink, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cls = pick_class(rng);
      const std::size_t planted_pos = pick_position(rng);
      const std::string& planted = out.planted_tokens[cls][pick_planted(rng)];
      std::string text;
      for (std::size_t w = 0; w < opts.seq_len; ++w) {
        if (!text.empty()) text.push_back(' ');
        text += (w == planted_pos) ? planted : distractor_name(pick_distractor(rng));
      }
      int label = static_cast<int>(cls);
      if (opts.noise_rate > 0.0 && unit(rng) < opts.noise_rate) {
        label = static_cast<int>((cls + 1 + pick_class(rng) % (opts.classes - 1)) % opts.classes);
      }
      sink.data->records.push_back({std::move(text), label});
      sink.truth->push_back({planted, planted_pos});
    }
  };
  emit({&out.train, &out.train_truth}, opts.n_train);
  emit({&out.validation, &out.validation_truth}, opts.n_validation);
  emit({&out.test, &out.test_truth}, opts.n_test);
  return out;
}

namespace {

nlohmann::ordered_json truth_to_json(const std::vector<PlantedTruth>& truth) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& t : truth) {
    arr.push_back({{"planted_token", t.planted_token}, {"word_index", t.word_index}});
  }
  return arr;
}

std::vector<PlantedTruth> truth_from_json(const nlohmann::json& arr) {
  std::vector<PlantedTruth> out;
  for (const auto& t : arr) {
    out.push_back({t.at("planted_token").get<std::string>(),
                   t.at("word_index").get<std::size_t>()});
  }
  return out;
}

}  // namespace

void write_ground_truth(const SyntheticDataset& data, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["planted_tokens"] = data.planted_tokens;
  j["train"] = truth_to_json(data.train_truth);
  j["validation"] = truth_to_json(data.validation_truth);
  j["test"] = truth_to_json(data.test_truth);
  std::ofstream out(path);
  if (!out) throw DataError("ground truth: cannot write " + path.string());
  out << j.dump(2) << "\n";
}

GroundTruthFile load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("ground truth: cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  GroundTruthFile out;
  out.planted_tokens = j.at("planted_tokens").get<std::vector<std::vector<std::string>>>();
  out.train = truth_from_json(j.at("train"));
  out.validation = truth_from_json(j.at("validation"));
  out.test = truth_from_json(j.at("test"));
  return out;
}

std::vector<std::string> generate_chain_corpus(const ChainCorpusOptions& opts) {
  if (opts.vocab_content < 2) throw DataError("chain corpus: need at least two words");
  if (opts.seq_len < 2) throw DataError("chain corpus: seq_len must be at least 2");
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> successor(opts.vocab_content);
  std::iota(successor.begin(), successor.end(), 0);
  std::shuffle(successor.begin(), successor.end(), rng);

  std::uniform_int_distribution<std::size_t> pick_start(0, opts.vocab_content - 1);
  std::vector<std::string> lines;
  lines.reserve(opts.n_sequences);
  for (std::size_t i = 0; i < opts.n_sequences; ++i) {
    std::size_t word = pick_start(rng);
    std::string line;
    for (std::size_t w = 0; w < opts.seq_len; ++w) {
      if (!line.empty()) line.push_back(' ');
      line += distractor_name(word);
      word = successor[word];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace decsal
