#include "decsal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "decsal/errors.hpp"
#include "decsal/parallel.hpp"

namespace decsal {

std::string game_name(Game g) { return g == Game::kHiding ? "hiding" : "revealing"; }

void EvalCurve::validate() const {
  if (points.size() < 2) throw DataError("curve: need at least two points");
  if (points.front().fraction != 0.0 || points.back().fraction != 1.0) {
    throw DataError("curve: fractions must start at 0 and end at 1");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i].fraction > points[i - 1].fraction)) {
      throw DataError("curve: fractions must be strictly increasing");
    }
    if (points[i].accuracy < 0.0 || points[i].accuracy > 1.0) {
      throw DataError("curve: accuracy outside [0,1]");
    }
  }
}

double auc(const EvalCurve& curve) {
  if (curve.points.size() < 2) throw DataError("auc: need at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fraction - a.fraction) * 0.5 * (a.accuracy + b.accuracy);
  }
  return area;
}

std::vector<double> default_fraction_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
  return grid;
}

std::vector<std::size_t> importance_order(const TokenSeq& seq,
                                          const std::vector<double>& scores) {
  if (scores.size() != seq.ids.size()) {
    throw DataError("game: need one score per position, got " + std::to_string(scores.size()) +
                    " for length " + std::to_string(seq.ids.size()));
  }
  std::vector<std::size_t> order = seq.content_positions();
  auto key = [&](std::size_t pos) {
    const double s = scores[pos];
    return std::isfinite(s) ? s : -std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) > key(b);
    return a < b;
  });
  return order;
}

namespace {

void check_fractions(const std::vector<double>& fractions) {
  if (fractions.size() < 2 || fractions.front() != 0.0 || fractions.back() != 1.0) {
    throw DataError("game: the fraction grid must run from 0 to 1");
  }
  for (std::size_t i = 1; i < fractions.size(); ++i) {
    if (!(fractions[i] > fractions[i - 1])) {
      throw DataError("game: fractions must be strictly increasing");
    }
  }
}

// Per-fraction count of masked content positions.
std::vector<std::size_t> masked_counts(Game game, std::size_t n_content,
                                       const std::vector<double>& fractions) {
  std::vector<std::size_t> counts(fractions.size());
  const double n = static_cast<double>(n_content);
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (game == Game::kHiding) {
      counts[i] = static_cast<std::size_t>(std::floor(fractions[i] * n));
    } else {
      const auto revealed = static_cast<std::size_t>(std::ceil(fractions[i] * n));
      counts[i] = n_content - revealed;
    }
  }
  return counts;
}

// Masks the `count` highest-ranked positions (hiding) or everything but the
// `n-count` highest (revealing): in both games the masked set is a suffix or
// prefix of the same importance order.
int predict_with_masked(const Model& m, const TokenSeq& seq,
                        const std::vector<std::size_t>& order, std::size_t masked_count,
                        Game game) {
  TokenSeq modified = seq;
  if (game == Game::kHiding) {
    for (std::size_t r = 0; r < masked_count; ++r) {
      modified.ids[order[r]] = kMaskId;
      modified.mask[order[r]] = 0;
    }
  } else {
    for (std::size_t r = order.size() - masked_count; r < order.size(); ++r) {
      modified.ids[order[r]] = kMaskId;
      modified.mask[order[r]] = 0;
    }
  }
  return m.forward(modified).predicted_class();
}

EvalCurve game_curve(const Model& m, const std::vector<GameInput>& data,
                     const std::vector<double>& fractions, const std::string& explainer,
                     Game game) {
  if (data.empty()) throw DataError("game: empty dataset");
  check_fractions(fractions);
  std::vector<std::vector<std::uint8_t>> correct(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const GameInput& input = data[i];
    const auto order = importance_order(input.seq, input.scores);
    const auto counts = masked_counts(game, order.size(), fractions);
    std::map<std::size_t, std::uint8_t> by_count;
    for (std::size_t f = 0; f < counts.size(); ++f) {
      auto it = by_count.find(counts[f]);
      if (it == by_count.end()) {
        const int pred = predict_with_masked(m, input.seq, order, counts[f], game);
        it = by_count.emplace(counts[f], pred == input.label ? 1 : 0).first;
      }
      correct[i].push_back(it->second);
    }
  });
  EvalCurve curve;
  curve.game = game;
  curve.explainer = explainer;
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) acc += correct[i][f];
    curve.points.push_back({fractions[f], acc / static_cast<double>(data.size())});
  }
  curve.validate();
  return curve;
}

}  // namespace

EvalCurve hiding_curve(const Model& m, const std::vector<GameInput>& data,
                       const std::vector<double>& fractions, const std::string& explainer) {
  return game_curve(m, data, fractions, explainer, Game::kHiding);
}

EvalCurve revealing_curve(const Model& m, const std::vector<GameInput>& data,
                          const std::vector<double>& fractions, const std::string& explainer) {
  return game_curve(m, data, fractions, explainer, Game::kRevealing);
}

CurvePair random_baseline(const Model& m, const std::vector<LabelledSeq>& data,
                          const std::vector<double>& fractions, std::size_t trials,
                          std::uint64_t seed) {
  if (trials < 1) throw DataError("random baseline: need at least one trial");
  if (data.empty()) throw DataError("random baseline: empty dataset");
  check_fractions(fractions);
  std::vector<double> hide_acc(fractions.size(), 0.0);
  std::vector<double> reveal_acc(fractions.size(), 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<GameInput> inputs(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      inputs[i].seq = data[i].seq;
      inputs[i].label = data[i].label;
      inputs[i].scores.assign(data[i].seq.ids.size(), 0.0);
      std::mt19937_64 rng(mix_seed(seed, trial, i));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t pos : data[i].seq.content_positions()) {
        inputs[i].scores[pos] = unit(rng);
      }
    }
    EvalCurve h = hiding_curve(m, inputs, fractions, "random");
    EvalCurve r = revealing_curve(m, inputs, fractions, "random");
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      hide_acc[f] += h.points[f].accuracy;
      reveal_acc[f] += r.points[f].accuracy;
    }
  }
  CurvePair pair;
  pair.hiding.game = Game::kHiding;
  pair.hiding.explainer = "random";
  pair.revealing.game = Game::kRevealing;
  pair.revealing.explainer = "random";
  for (std::size_t f = 0; f < fractions.size(); ++f) {
    pair.hiding.points.push_back({fractions[f], hide_acc[f] / static_cast<double>(trials)});
    pair.revealing.points.push_back({fractions[f], reveal_acc[f] / static_cast<double>(trials)});
  }
  pair.hiding.validate();
  pair.revealing.validate();
  return pair;
}

double IdfTable::idf(const std::string& token) const {
  auto it = weights.find(token);
  if (it != weights.end()) return it->second;
  return std::log(static_cast<double>(1 + n_docs)) + 1.0;  // df = 0
}

IdfTable build_idf(const std::vector<std::string>& documents) {
  if (documents.empty()) throw DataError("idf: empty corpus");
  IdfTable table;
  table.n_docs = documents.size();
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    std::set<std::string> seen;
    for (auto& tok : tokenize_words(doc)) seen.insert(std::move(tok));
    for (const auto& tok : seen) ++df[tok];
  }
  for (const auto& [tok, count] : df) {
    table.weights[tok] =
        std::log(static_cast<double>(1 + table.n_docs) / static_cast<double>(1 + count)) + 1.0;
  }
  return table;
}

std::vector<ClassRanking> class_token_ranking(const std::vector<ExplanationRecord>& explanations,
                                              const IdfTable& idf, std::size_t classes) {
  if (explanations.empty()) throw DataError("ranking: no explanations");
  std::vector<std::map<std::string, double>> totals(classes);
  for (const auto& rec : explanations) {
    if (rec.predicted_class < 0 || static_cast<std::size_t>(rec.predicted_class) >= classes) {
      throw DataError("ranking: predicted class " + std::to_string(rec.predicted_class) +
                      " outside 0.." + std::to_string(classes - 1));
    }
    auto& bucket = totals[static_cast<std::size_t>(rec.predicted_class)];
    for (const auto& [token, score] : rec.token_scores) bucket[token] += score;
  }
  std::vector<ClassRanking> rankings(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    rankings[c].cls = static_cast<int>(c);
    for (const auto& [token, total] : totals[c]) {
      rankings[c].tokens.push_back({token, idf.idf(token) * total});
    }
    std::stable_sort(rankings[c].tokens.begin(), rankings[c].tokens.end(),
                     [](const RankedToken& a, const RankedToken& b) {
                       if (a.weight != b.weight) return a.weight > b.weight;
                       return a.token < b.token;
                     });
  }
  return rankings;
}

OverlapReport overlap(const std::vector<ClassRanking>& rankings, std::size_t k) {
  if (rankings.size() < 2) throw DataError("overlap: need at least two classes");
  if (k < 1) throw DataError("overlap: k must be positive");
  OverlapReport report;
  report.requested_k = k;
  std::size_t min_len = rankings.front().tokens.size();
  for (const auto& r : rankings) min_len = std::min(min_len, r.tokens.size());
  if (min_len == 0) throw DataError("overlap: a class has no ranked tokens");
  report.k = std::min(k, min_len);

  std::vector<std::set<std::string>> tops(rankings.size());
  for (std::size_t c = 0; c < rankings.size(); ++c) {
    for (std::size_t i = 0; i < report.k; ++i) tops[c].insert(rankings[c].tokens[i].token);
  }
  std::size_t total = 0;
  for (std::size_t a = 0; a < rankings.size(); ++a) {
    for (std::size_t b = a + 1; b < rankings.size(); ++b) {
      OverlapPair pair;
      pair.class_a = rankings[a].cls;
      pair.class_b = rankings[b].cls;
      for (const auto& tok : tops[a]) {
        if (tops[b].count(tok)) pair.tokens.push_back(tok);
      }
      pair.count = pair.tokens.size();
      pair.percentage = static_cast<double>(pair.count) / static_cast<double>(report.k);
      total += pair.count;
      report.pairs.push_back(std::move(pair));
    }
  }
  const std::size_t c = rankings.size();
  const double denom = static_cast<double>(c * (c - 1) / 2) * static_cast<double>(report.k);
  report.percentage = static_cast<double>(total) / denom;
  return report;
}

}  // namespace decsal
