#include "decsal/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "decsal/errors.hpp"

namespace decsal {

std::string method_name(SaliencyMethod m) {
  return m == SaliencyMethod::kGradCam ? "gradcam" : "simple";
}

SaliencyMethod method_from_name(const std::string& name) {
  if (name == "gradcam") return SaliencyMethod::kGradCam;
  if (name == "simple") return SaliencyMethod::kSimple;
  throw ConfigError("unknown saliency method '" + name + "' (gradcam|simple)");
}

namespace {

void check_layer(const Model& m, std::size_t layer) {
  if (layer > m.config().layers) {
    throw DataError("saliency: layer " + std::to_string(layer) + " out of range 0.." +
                    std::to_string(m.config().layers));
  }
}

void check_class(const Model& m, int target_class) {
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= m.config().classes) {
    throw DataError("saliency: class " + std::to_string(target_class) + " out of range 0.." +
                    std::to_string(m.config().classes - 1));
  }
}

}  // namespace

FeatureScores feature_scores_on(ForwardTrace& trace, SaliencyMethod method, int target_class,
                                std::size_t layer) {
  if (layer >= trace.layer_count()) {
    throw DataError("saliency: layer " + std::to_string(layer) + " out of range 0.." +
                    std::to_string(trace.layer_count() - 1));
  }
  FeatureScores fs;
  fs.layer = layer;
  fs.target_class = target_class;
  fs.method = method;
  NodeId h_node = trace.nodes.layers[layer];
  if (method == SaliencyMethod::kGradCam) {
    // The pre-softmax logit of the explained class.
    NodeId scalar =
        trace.tape.pick(trace.nodes.class_logits, 0, static_cast<std::size_t>(target_class));
    Matrix grad = trace.tape.gradient(scalar, h_node);
    fs.alpha = mul_elem(grad, trace.tape.value(h_node));
  } else {
    NodeId loss = trace.tape.cross_entropy(trace.nodes.class_logits, {target_class}, {0});
    fs.alpha = trace.tape.gradient(loss, h_node);
  }
  if (!fs.alpha.all_finite()) throw NumericError("saliency: non-finite feature scores");
  return fs;
}

FeatureScores feature_scores_gradcam(const Model& m, const TokenSeq& t, int target_class,
                                     std::size_t layer) {
  check_layer(m, layer);
  check_class(m, target_class);
  ForwardTrace trace = m.forward(t);
  return feature_scores_on(trace, SaliencyMethod::kGradCam, target_class, layer);
}

FeatureScores feature_scores_simple(const Model& m, const TokenSeq& t, int target_class,
                                    std::size_t layer) {
  check_layer(m, layer);
  check_class(m, target_class);
  ForwardTrace trace = m.forward(t);
  return feature_scores_on(trace, SaliencyMethod::kSimple, target_class, layer);
}

std::vector<double> aggregate(const FeatureScores& fs) {
  std::vector<double> out = row_sums(fs.alpha);
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix contributions_from_probs(const Matrix& phat, const std::vector<TokenId>& unique,
                                const std::vector<std::uint8_t>& mask) {
  if (unique.empty()) throw DataError("token_contributions: no content tokens");
  if (phat.rows() != mask.size()) {
    throw DimensionError("token_contributions: probabilities are " + phat.shape_str() +
                         " but the sequence has " + std::to_string(mask.size()) + " positions");
  }
  Matrix dhat(unique.size(), phat.rows());
  for (std::size_t i = 0; i < unique.size(); ++i) {
    const auto tok = static_cast<std::size_t>(unique[i]);
    for (std::size_t j = 0; j < phat.rows(); ++j) {
      dhat(i, j) = mask[j] ? phat(j, tok) : 0.0;
    }
  }
  return dhat;
}

TokenContributions token_contributions(const Model& m, const TokenSeq& t, std::size_t layer) {
  check_layer(m, layer);
  TokenContributions tc;
  tc.layer = layer;
  tc.token_ids = t.unique_content_ids();
  ForwardTrace trace = m.forward(t, {.want_classifier = false, .want_lm_logits = false});
  Matrix phat = lm_decode(m, trace.layer(layer));
  tc.dhat = contributions_from_probs(phat, tc.token_ids, t.mask);
  return tc;
}

Matrix restrict_top_tau(const Matrix& dhat, std::size_t tau) {
  const std::size_t t = dhat.rows(), n = dhat.cols();
  if (tau < 1 || tau > t) {
    throw DataError("decoded_saliency: tau " + std::to_string(tau) + " out of range 1.." +
                    std::to_string(t));
  }
  if (tau == t) return dhat;
  Matrix out(t, n);
  std::vector<std::size_t> order(t);
  for (std::size_t j = 0; j < n; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tau),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        if (dhat(a, j) != dhat(b, j)) return dhat(a, j) > dhat(b, j);
                        return a < b;
                      });
    for (std::size_t r = 0; r < tau; ++r) out(order[r], j) = dhat(order[r], j);
  }
  return out;
}

std::vector<double> decode_combine(const Matrix& weights, const std::vector<double>& sums,
                                   bool per_term_relu) {
  if (weights.cols() != sums.size()) {
    throw DimensionError("decode_combine: weights " + weights.shape_str() + " need " +
                         std::to_string(sums.size()) + " columns");
  }
  std::vector<double> out(weights.rows(), 0.0);
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      const double term = weights(i, j) * sums[j];
      acc += per_term_relu ? (term > 0.0 ? term : 0.0) : term;
    }
    out[i] = acc > 0.0 ? acc : 0.0;
  }
  return out;
}

SaliencyResult decoded_saliency_on(const Model& m, ForwardTrace& trace, const TokenSeq& t,
                                   const SaliencyRequest& req) {
  check_layer(m, req.layer);
  SaliencyResult res;
  res.layer = req.layer;
  res.method = req.method;
  res.identity_decoder = req.identity_decoder;
  res.predicted_class = trace.predicted_class();
  res.explained_class = req.target_class.value_or(res.predicted_class);
  check_class(m, res.explained_class);
  res.class_prob = trace.class_probs()[static_cast<std::size_t>(res.predicted_class)];

  res.token_ids = t.unique_content_ids();
  const std::size_t T = res.token_ids.size();
  if (T == 0) throw DataError("decoded_saliency: input has no content tokens");
  res.positions.resize(T);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < t.ids.size(); ++j) {
      if (t.ids[j] == res.token_ids[i]) res.positions[i].push_back(j);
    }
  }

  res.tau = req.tau.value_or(T);
  if (req.identity_decoder && req.layer != 0) {
    throw DataError("decoded_saliency: the identity decoder is the layer-0 vanilla mode");
  }

  FeatureScores fs = feature_scores_on(trace, req.method, res.explained_class, req.layer);
  std::vector<double> sums = row_sums(fs.alpha);
  const std::size_t n = t.ids.size();
  res.position_scores.assign(n, 0.0);
  res.scores.assign(T, 0.0);

  if (req.identity_decoder) {
    // Vanilla per-position scores; a token's score sums over its positions.
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j : res.positions[i]) {
        const double s = sums[j] > 0.0 ? sums[j] : 0.0;
        res.position_scores[j] = s;
        res.scores[i] += s;
      }
    }
  } else {
    Matrix phat = lm_decode(m, trace.layer(req.layer));
    Matrix weights =
        restrict_top_tau(contributions_from_probs(phat, res.token_ids, t.mask), res.tau);
    res.scores = decode_combine(weights, sums, req.per_term_relu);
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j : res.positions[i]) res.position_scores[j] = res.scores[i];
    }
  }

  if (req.method == SaliencyMethod::kSimple) {
    double norm = 0.0;
    for (double s : res.scores) norm += std::abs(s);
    if (norm > 0.0) {
      for (double& s : res.scores) s /= norm;
      for (double& s : res.position_scores) s /= norm;
    }
  }
  for (double s : res.scores) {
    if (!std::isfinite(s)) throw NumericError("decoded_saliency: non-finite score");
  }
  return res;
}

SaliencyResult decoded_saliency(const Model& m, const TokenSeq& t, const SaliencyRequest& req) {
  ForwardTrace trace = m.forward(t);
  return decoded_saliency_on(m, trace, t, req);
}

}  // namespace decsal
