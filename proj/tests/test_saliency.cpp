#include "decsal/saliency.hpp"

#include <cmath>
#include <random>

#include "decsal/errors.hpp"
#include "doctest.h"
#include "support/test_util.hpp"

using namespace decsal;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.vocab_size = 40;
  cfg.hidden = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.n_max = 8;
  cfg.classes = 3;
  cfg.seed = 15;
  return cfg;
}

TokenSeq make_seq(const ModelConfig& cfg, std::vector<TokenId> content) {
  TokenSeq seq;
  seq.ids.push_back(kClsId);
  for (TokenId id : content) seq.ids.push_back(id);
  seq.ids.push_back(kSepId);
  while (seq.ids.size() < cfg.n_max) seq.ids.push_back(kPadId);
  for (TokenId id : seq.ids) seq.mask.push_back(id == kPadId ? 0 : 1);
  return seq;
}

}  // namespace

TEST_CASE("gradcam alpha matches finite differences times activations") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {7, 12, 20, 9});
  const int cls = 1;
  for (std::size_t layer : {0u, 1u, 2u}) {
    FeatureScores fs = feature_scores_gradcam(m, seq, cls, layer);
    ForwardTrace trace = m.forward(seq);
    const Matrix h = trace.layer(layer);
    Matrix grad_fd = testutil::finite_difference(
        [&](const Matrix& probe) {
          ForwardTrace t2 = m.forward_from_layer(layer, probe, seq.mask);
          return t2.class_logits()(0, cls);
        },
        h);
    CHECK(testutil::grad_close(fs.alpha, mul_elem(grad_fd, h)));
  }
}

TEST_CASE("gradcam alpha rows vanish where the layer state is zero") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  std::mt19937_64 rng(3);
  Matrix h = testutil::random_matrix(rng, cfg.n_max, cfg.hidden);
  for (std::size_t j = 0; j < cfg.hidden; ++j) h(2, j) = 0.0;
  std::vector<std::uint8_t> mask(cfg.n_max, 1);
  ForwardTrace trace = m.forward_from_layer(1, h, mask);
  FeatureScores fs = feature_scores_on(trace, SaliencyMethod::kGradCam, 0, 0);
  for (std::size_t j = 0; j < cfg.hidden; ++j) CHECK(fs.alpha(2, j) == 0.0);
}

TEST_CASE("gradcam row sum at the last layer equals the directional derivative") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {6, 11, 13});
  const int cls = 2;
  FeatureScores fs = feature_scores_gradcam(m, seq, cls, cfg.layers);

  ForwardTrace trace = m.forward(seq);
  NodeId scalar = trace.tape.pick(trace.nodes.class_logits, 0, cls);
  Matrix grad = trace.tape.gradient(scalar, trace.nodes.layers[cfg.layers]);
  const Matrix& h = trace.layer(cfg.layers);
  double dot = 0.0;
  for (std::size_t k = 0; k < cfg.hidden; ++k) dot += h(0, k) * grad(0, k);
  double alpha_sum = 0.0;
  for (std::size_t k = 0; k < cfg.hidden; ++k) alpha_sum += fs.alpha(0, k);
  CHECK(std::abs(alpha_sum - dot) < 1e-8);
}

TEST_CASE("simple gradient matches finite differences of the class loss") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {8, 21, 30});
  const int cls = 0;
  const std::size_t layer = 1;
  FeatureScores fs = feature_scores_simple(m, seq, cls, layer);
  ForwardTrace trace = m.forward(seq);
  Matrix fd = testutil::finite_difference(
      [&](const Matrix& probe) {
        ForwardTrace t2 = m.forward_from_layer(layer, probe, seq.mask);
        Tape& tape = t2.tape;
        NodeId loss = tape.cross_entropy(t2.nodes.class_logits, {cls}, {0});
        return tape.value(loss)(0, 0);
      },
      trace.layer(layer));
  CHECK(testutil::grad_close(fs.alpha, fd));
}

TEST_CASE("feature scores reject out-of-range layers and classes") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {6});
  CHECK_THROWS_AS(feature_scores_gradcam(m, seq, 0, cfg.layers + 1), DataError);
  CHECK_THROWS_AS(feature_scores_gradcam(m, seq, 5, 0), DataError);
}

TEST_CASE("aggregate applies ReLU to row sums") {
  FeatureScores fs;
  fs.alpha = Matrix{{1, -2, 3}, {-1, -1, 0}, {0, 0, 0}};
  auto s = aggregate(fs);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == 2.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.0);
}

TEST_CASE("contributions hand example: rows are P-hat columns of the unique tokens") {
  Matrix phat{{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}};
  Matrix dhat = contributions_from_probs(phat, {0, 2}, {1, 1});
  REQUIRE(dhat.rows() == 2);
  REQUIRE(dhat.cols() == 2);
  CHECK(dhat(0, 0) == 0.7);
  CHECK(dhat(0, 1) == 0.1);
  CHECK(dhat(1, 0) == 0.1);
  CHECK(dhat(1, 1) == 0.6);
}

TEST_CASE("contributions zero the columns of masked positions") {
  Matrix phat{{0.7, 0.2, 0.1}, {0.1, 0.3, 0.6}};
  Matrix dhat = contributions_from_probs(phat, {0, 2}, {1, 0});
  CHECK(dhat(0, 1) == 0.0);
  CHECK(dhat(1, 1) == 0.0);
  CHECK(dhat(0, 0) == 0.7);
}

TEST_CASE("one-hot decode rows make the restricted contributions a permutation") {
  Matrix phat{{0, 1, 0, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}};
  Matrix dhat = contributions_from_probs(phat, {1, 3, 0}, {1, 1, 1});
  // Row i has a single 1 in the column of its token's position.
  int ones = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (dhat(i, j) == 1.0) ++ones;
      CHECK((dhat(i, j) == 0.0 || dhat(i, j) == 1.0));
    }
  CHECK(ones == 3);
}

TEST_CASE("duplicate tokens produce one row covering every duplicate position") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {9, 14, 9});  // token 9 twice
  TokenContributions tc = token_contributions(m, seq, 1);
  REQUIRE(tc.token_ids.size() == 2);
  CHECK(tc.token_ids[0] == 9);
  CHECK(tc.dhat.rows() == 2);
  Matrix phat = lm_decode(m, m.forward(seq).layer(1));
  // Positions 1 and 3 hold token 9; the single row reads both columns.
  CHECK(tc.dhat(0, 1) == phat(1, 9));
  CHECK(tc.dhat(0, 3) == phat(3, 9));
}

TEST_CASE("contribution columns sum to at most one") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<TokenId> pick(kNumSpecials, static_cast<TokenId>(cfg.vocab_size) - 1);
  for (int trial = 0; trial < 10; ++trial) {
    TokenSeq seq = make_seq(cfg, {pick(rng), pick(rng), pick(rng), pick(rng)});
    for (std::size_t layer = 0; layer <= cfg.layers; ++layer) {
      TokenContributions tc = token_contributions(m, seq, layer);
      for (std::size_t j = 0; j < tc.dhat.cols(); ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < tc.dhat.rows(); ++i) {
          colsum += tc.dhat(i, j);
          CHECK(tc.dhat(i, j) >= 0.0);
          CHECK(tc.dhat(i, j) <= 1.0);
        }
        CHECK(colsum <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("token_contributions rejects inputs without content tokens") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {});
  CHECK_THROWS_AS(token_contributions(m, seq, 0), DataError);
}

TEST_CASE("top-tau restriction keeps each column's best rows with stable ties") {
  Matrix dhat{{0.7, 0.1}, {0.1, 0.6}};
  Matrix top1 = restrict_top_tau(dhat, 1);
  CHECK(top1(0, 0) == 0.7);
  CHECK(top1(1, 0) == 0.0);
  CHECK(top1(0, 1) == 0.0);
  CHECK(top1(1, 1) == 0.6);

  // Tie in a column: the lower row index wins.
  Matrix tied{{0.5, 0.2}, {0.5, 0.9}};
  Matrix picked = restrict_top_tau(tied, 1);
  CHECK(picked(0, 0) == 0.5);
  CHECK(picked(1, 0) == 0.0);

  CHECK_THROWS_AS(restrict_top_tau(dhat, 0), DataError);
  CHECK_THROWS_AS(restrict_top_tau(dhat, 3), DataError);
}

TEST_CASE("top-tau support grows monotonically with tau") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix dhat = testutil::random_matrix(rng, 6, 5, 0.0, 1.0);
    Matrix prev = restrict_top_tau(dhat, 1);
    for (std::size_t tau = 2; tau <= 6; ++tau) {
      Matrix cur = restrict_top_tau(dhat, tau);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 5; ++j)
          if (prev(i, j) != 0.0) CHECK(cur(i, j) == prev(i, j));
      prev = cur;
    }
    CHECK(prev == dhat);  // tau = T is unrestricted
  }
}

TEST_CASE("decode_combine with an identity decoder reproduces the aggregate scores") {
  std::vector<double> sums{1.5, -2.0, 0.25};
  auto s = decode_combine(Matrix::identity(3), sums, false);
  CHECK(s[0] == 1.5);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.25);
}

TEST_CASE("decode_combine hand example with tau=1 weights") {
  Matrix w = restrict_top_tau(Matrix{{0.7, 0.1}, {0.1, 0.6}}, 1);
  auto s = decode_combine(w, {1.0, 1.0}, false);
  CHECK(s[0] == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("per-term ReLU differs from sum-then-ReLU exactly as specified") {
  Matrix w{{0.5, 0.5}};
  std::vector<double> sums{1.0, -3.0};
  auto summed = decode_combine(w, sums, false);
  CHECK(summed[0] == 0.0);  // 0.5 - 1.5 clipped
  auto per_term = decode_combine(w, sums, true);
  CHECK(per_term[0] == 0.5);  // negative term dropped before accumulation
}

TEST_CASE("decoded saliency with tau=T matches a naive double-loop oracle") {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<TokenId> pick(kNumSpecials, static_cast<TokenId>(cfg.vocab_size) - 1);
  for (int trial = 0; trial < 10; ++trial) {
    cfg.seed = 100 + static_cast<std::uint64_t>(trial);
    Model m = init_model(cfg);
    TokenSeq seq = make_seq(cfg, {pick(rng), pick(rng), pick(rng), pick(rng)});
    SaliencyRequest req;
    req.layer = trial % (cfg.layers + 1);
    SaliencyResult res = decoded_saliency(m, seq, req);

    ForwardTrace trace = m.forward(seq);
    FeatureScores fs = feature_scores_on(trace, SaliencyMethod::kGradCam, res.explained_class,
                                         req.layer);
    TokenContributions tc = token_contributions(m, seq, req.layer);
    std::vector<double> sums = row_sums(fs.alpha);
    for (std::size_t i = 0; i < tc.token_ids.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < seq.ids.size(); ++j) acc += tc.dhat(i, j) * sums[j];
      const double want = acc > 0.0 ? acc : 0.0;
      CHECK(std::abs(res.scores[i] - want) < 1e-12);
    }
  }
}

TEST_CASE("layer-0 identity mode reproduces the vanilla per-position scores bitwise") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {10, 25, 31, 17});
  SaliencyRequest req;
  req.layer = 0;
  req.identity_decoder = true;
  SaliencyResult res = decoded_saliency(m, seq, req);

  ForwardTrace trace = m.forward(seq);
  FeatureScores fs =
      feature_scores_on(trace, SaliencyMethod::kGradCam, res.explained_class, 0);
  auto eq2 = aggregate(fs);
  for (std::size_t i = 0; i < res.token_ids.size(); ++i) {
    REQUIRE(res.positions[i].size() == 1);
    CHECK(res.scores[i] == eq2[res.positions[i][0]]);  // bitwise
    CHECK(res.position_scores[res.positions[i][0]] == eq2[res.positions[i][0]]);
  }
  CHECK_THROWS_AS(decoded_saliency(m, seq, SaliencyRequest{.layer = 1, .identity_decoder = true}),
                  DataError);
}

TEST_CASE("identity mode sums duplicate positions after the ReLU") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {10, 25, 10});
  SaliencyRequest req;
  req.layer = 0;
  req.identity_decoder = true;
  SaliencyResult res = decoded_saliency(m, seq, req);
  ForwardTrace trace = m.forward(seq);
  auto eq2 = aggregate(feature_scores_on(trace, SaliencyMethod::kGradCam, res.explained_class, 0));
  CHECK(res.scores[0] == eq2[1] + eq2[3]);
}

TEST_CASE("decoded saliency scores are nonnegative and deterministic") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {11, 22, 33});
  for (std::size_t layer = 0; layer <= cfg.layers; ++layer) {
    SaliencyRequest req;
    req.layer = layer;
    SaliencyResult a = decoded_saliency(m, seq, req);
    SaliencyResult b = decoded_saliency(m, seq, req);
    CHECK(a.scores == b.scores);
    for (double s : a.scores) CHECK(s >= 0.0);
  }
}

TEST_CASE("simple-method scores are L1 normalized with a zero-gradient guard") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {12, 18, 26});
  SaliencyRequest req;
  req.layer = 1;
  req.method = SaliencyMethod::kSimple;
  SaliencyResult res = decoded_saliency(m, seq, req);
  double total = 0.0;
  for (double s : res.scores) total += std::abs(s);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  // All-zero weights give a zero classifier gradient everywhere; the
  // normalization guard must return zeros, not NaN.
  Model zero(cfg);
  SaliencyResult degenerate = decoded_saliency(zero, seq, req);
  for (double s : degenerate.scores) CHECK(s == 0.0);
}

TEST_CASE("decoded saliency validates tau, layer, class, and content") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {12, 18});
  CHECK_THROWS_AS(decoded_saliency(m, seq, SaliencyRequest{.layer = 9}), DataError);
  CHECK_THROWS_AS(decoded_saliency(m, seq, SaliencyRequest{.layer = 1, .tau = 3}), DataError);
  CHECK_THROWS_AS(decoded_saliency(m, seq, SaliencyRequest{.layer = 1, .tau = 0}), DataError);
  SaliencyRequest bad_class;
  bad_class.layer = 1;
  bad_class.target_class = 7;
  CHECK_THROWS_AS(decoded_saliency(m, seq, bad_class), DataError);
  TokenSeq empty = make_seq(cfg, {});
  CHECK_THROWS_AS(decoded_saliency(m, empty, SaliencyRequest{.layer = 1}), DataError);
}

TEST_CASE("explaining a non-predicted class is supported") {
  ModelConfig cfg = small_config();
  Model m = init_model(cfg);
  TokenSeq seq = make_seq(cfg, {13, 19, 27});
  SaliencyRequest req;
  req.layer = 2;
  ForwardTrace trace = m.forward(seq);
  const int predicted = trace.predicted_class();
  req.target_class = (predicted + 1) % static_cast<int>(cfg.classes);
  SaliencyResult res = decoded_saliency(m, seq, req);
  CHECK(res.explained_class == *req.target_class);
  CHECK(res.predicted_class == predicted);
}
