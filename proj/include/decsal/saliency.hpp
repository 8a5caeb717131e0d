#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "decsal/model.hpp"
#include "decsal/vocab.hpp"

namespace decsal {

enum class SaliencyMethod { kGradCam, kSimple };

std::string method_name(SaliencyMethod m);
SaliencyMethod method_from_name(const std::string& name);

/// Per-feature scores for one layer: alpha is n x K, aligned with h_l.
struct FeatureScores {
  Matrix alpha;
  std::size_t layer = 0;
  int target_class = 0;
  SaliencyMethod method = SaliencyMethod::kGradCam;
};

/// D_hat: row i holds the decoded probability of unique content token i at
/// every output position; columns of masked positions are zeroed.
struct TokenContributions {
  Matrix dhat;  // T x n
  std::vector<TokenId> token_ids;
  std::size_t layer = 0;
};

struct SaliencyResult {
  std::vector<TokenId> token_ids;               // T unique content tokens
  std::vector<std::vector<std::size_t>> positions;  // per token, its input positions
  std::vector<double> scores;                   // nonnegative, aligned with token_ids
  std::vector<double> position_scores;          // length n broadcast for highlighting
  std::size_t layer = 0;
  SaliencyMethod method = SaliencyMethod::kGradCam;
  std::size_t tau = 0;
  bool identity_decoder = false;
  int predicted_class = 0;
  int explained_class = 0;
  double class_prob = 0.0;
};

// Grad-CAM feature scores: alpha[i,k] = d(logit_c)/d(h_l[i,k]) * h_l[i,k],
// with the gradient taken on the computation downstream of h_l only.
FeatureScores feature_scores_gradcam(const Model& m, const TokenSeq& t, int target_class,
                                     std::size_t layer);
// Gradient of the cross-entropy against `target_class` wrt h_l, no
// activation weighting.
FeatureScores feature_scores_simple(const Model& m, const TokenSeq& t, int target_class,
                                    std::size_t layer);

// Same contracts, computed on an existing trace so one forward can serve
// several layers and methods.
FeatureScores feature_scores_on(ForwardTrace& trace, SaliencyMethod method, int target_class,
                                std::size_t layer);

// Eq-style aggregation: s[i] = ReLU(sum_k alpha[i,k]); length n.
std::vector<double> aggregate(const FeatureScores& fs);

TokenContributions token_contributions(const Model& m, const TokenSeq& t, std::size_t layer);

// Pure construction of D_hat from decoded probabilities; row order follows
// `unique`, columns at mask=off positions are zeroed.
Matrix contributions_from_probs(const Matrix& phat, const std::vector<TokenId>& unique,
                                const std::vector<std::uint8_t>& mask);

// Per-column top-tau restriction: in each column, entries outside that
// column's tau largest are zeroed; ties keep the lower row index.
Matrix restrict_top_tau(const Matrix& dhat, std::size_t tau);

// The weighted-combination core: s_i = ReLU(sum_j W[i,j] * sums[j]), or the
// per-term variant sum_j ReLU(W[i,j] * sums[j]).
std::vector<double> decode_combine(const Matrix& weights, const std::vector<double>& sums,
                                   bool per_term_relu);

struct SaliencyRequest {
  std::size_t layer = 0;
  SaliencyMethod method = SaliencyMethod::kGradCam;
  std::optional<int> target_class;  // default: the model's predicted class
  std::optional<std::size_t> tau;   // default: T (unrestricted)
  bool per_term_relu = false;       // apply ReLU per contribution before accumulating
  bool identity_decoder = false;    // layer 0 only: the vanilla per-position baseline
};

SaliencyResult decoded_saliency(const Model& m, const TokenSeq& t, const SaliencyRequest& req);
// Trace-sharing variant for batch explanation.
SaliencyResult decoded_saliency_on(const Model& m, ForwardTrace& trace, const TokenSeq& t,
                                   const SaliencyRequest& req);

}  // namespace decsal
