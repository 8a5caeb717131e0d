#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "decsal/model.hpp"
#include "decsal/train.hpp"
#include "decsal/vocab.hpp"

namespace decsal {

enum class Game { kHiding, kRevealing };
std::string game_name(Game g);

struct EvalPoint {
  double fraction = 0.0;
  double accuracy = 0.0;
};

struct EvalCurve {
  Game game = Game::kHiding;
  std::string explainer;
  std::vector<EvalPoint> points;
  // Fractions strictly increasing from 0 to 1, accuracies within [0,1].
  void validate() const;
};

// Trapezoidal area over fraction in [0,1]; needs at least two points.
double auc(const EvalCurve& curve);

// 0, 0.05, ..., 1.0
std::vector<double> default_fraction_grid();

/// One labelled input with per-position importance scores. Scores at
/// special positions are ignored; non-finite scores rank below any finite
/// score.
struct GameInput {
  TokenSeq seq;
  int label = 0;
  std::vector<double> scores;
};

// Content positions ordered by descending importance (ties keep the lower
// position index); the prefix is what hiding masks first and revealing
// reveals first.
std::vector<std::size_t> importance_order(const TokenSeq& seq, const std::vector<double>& scores);

EvalCurve hiding_curve(const Model& m, const std::vector<GameInput>& data,
                       const std::vector<double>& fractions, const std::string& explainer);
EvalCurve revealing_curve(const Model& m, const std::vector<GameInput>& data,
                          const std::vector<double>& fractions, const std::string& explainer);

struct CurvePair {
  EvalCurve hiding;
  EvalCurve revealing;
};

// Uniformly random rankings, averaged pointwise over `trials`; the stream
// for (trial, input) is independently seeded so parallel runs agree with
// serial ones.
CurvePair random_baseline(const Model& m, const std::vector<LabelledSeq>& data,
                          const std::vector<double>& fractions, std::size_t trials,
                          std::uint64_t seed);

struct IdfTable {
  std::unordered_map<std::string, double> weights;
  std::size_t n_docs = 0;
  double idf(const std::string& token) const;
};

// idf(tok) = ln((1+N)/(1+df)) + 1 over the document stream.
IdfTable build_idf(const std::vector<std::string>& documents);

struct RankedToken {
  std::string token;
  double weight = 0.0;
};

struct ClassRanking {
  int cls = 0;
  std::vector<RankedToken> tokens;  // weight descending, ties lexicographic
};

/// Token-level view of one explanation, keyed by predicted class.
struct ExplanationRecord {
  int predicted_class = 0;
  std::vector<std::pair<std::string, double>> token_scores;
};

std::vector<ClassRanking> class_token_ranking(const std::vector<ExplanationRecord>& explanations,
                                              const IdfTable& idf, std::size_t classes);

struct OverlapPair {
  int class_a = 0;
  int class_b = 0;
  std::vector<std::string> tokens;  // distinct tokens in both top-k lists
  std::size_t count = 0;
  double percentage = 0.0;  // count / k
};

struct OverlapReport {
  std::size_t requested_k = 0;
  std::size_t k = 0;  // clamped to the shortest ranking when necessary
  std::vector<OverlapPair> pairs;
  double percentage = 0.0;  // sum of counts / (C choose 2 * k)
};

OverlapReport overlap(const std::vector<ClassRanking>& rankings, std::size_t k);

}  // namespace decsal
