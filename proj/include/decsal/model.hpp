#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "decsal/matrix.hpp"
#include "decsal/tape.hpp"
#include "decsal/vocab.hpp"

namespace decsal {

struct ModelConfig {
  std::size_t vocab_size = 0;  // V
  std::size_t hidden = 64;     // K, feature count
  std::size_t layers = 4;      // L transformer blocks
  std::size_t heads = 4;       // H
  std::size_t n_max = 32;
  std::size_t classes = 2;     // C
  std::uint64_t seed = 0;
  bool tie_lm_embedding = false;

  std::size_t head_dim() const { return hidden / heads; }
  std::size_t ff_hidden() const { return 4 * hidden; }
  void validate() const;  // throws ConfigError
};

struct BlockWeights {
  Matrix wq, wk, wv;  // K x K, H concatenated heads
  Matrix wo, bo;      // attention output projection
  Matrix ff1, bf1;    // K x F
  Matrix ff2, bf2;    // F x K
  Matrix ln1_gain, ln1_bias;
  Matrix ln2_gain, ln2_bias;
};

struct LmHead {
  Matrix dense, dense_bias;  // K x K
  Matrix ln_gain, ln_bias;
  Matrix proj, proj_bias;  // K x V, untied unless configured otherwise
};

struct ClassifierHead {
  Matrix w, b;  // K x C on the first-position state
};

class Model;

struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  bool lm_head = false;
  bool embedding = false;
};
struct ConstParamRef {
  std::string name;
  const Matrix* value = nullptr;
  bool lm_head = false;
  bool embedding = false;
};

/// Parameter leaves of one model bound onto one tape; several sequence
/// forwards may share a binding so a batch needs a single reverse sweep.
struct BoundModel {
  NodeId tok_embed, pos_embed;
  struct Block {
    NodeId wq, wk, wv, wo, bo, ff1, bf1, ff2, bf2, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  };
  std::vector<Block> blocks;
  NodeId lm_dense, lm_dense_bias, lm_ln_gain, lm_ln_bias, lm_proj, lm_proj_bias;
  NodeId cls_w, cls_b;
  // Same order as Model::parameters().
  std::vector<NodeId> ordered;
};

struct ForwardOptions {
  bool want_classifier = true;
  bool want_lm_logits = false;
};

/// Nodes produced by one sequence forward on a shared tape.
struct SeqNodes {
  std::vector<NodeId> layers;  // h_0 .. h_L
  NodeId class_logits;
  NodeId lm_logits;                             // valid iff requested
  std::vector<std::vector<NodeId>> attention;  // per block, per head: softmaxed A
};

/// A full forward pass with every layer output retained and addressable
/// for gradient queries.
class ForwardTrace {
 public:
  Tape tape;
  BoundModel bound;
  SeqNodes nodes;

  const Matrix& layer(std::size_t l) const { return tape.value(nodes.layers.at(l)); }
  std::size_t layer_count() const { return nodes.layers.size(); }  // L + 1
  const Matrix& class_logits() const { return tape.value(nodes.class_logits); }
  int predicted_class() const;
  // Softmax of the 1 x C logits.
  std::vector<double> class_probs() const;
};

class Model {
 public:
  Model() = default;
  explicit Model(ModelConfig cfg);  // zero weights; use init_model for random draws

  const ModelConfig& config() const { return cfg_; }

  Matrix tok_embed, pos_embed;
  std::vector<BlockWeights> blocks;
  LmHead lm_head;
  ClassifierHead classifier;
  bool lm_pretrained = false;  // set by MLM pretraining; the head is frozen afterwards

  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;

  ForwardTrace forward(const TokenSeq& t, const ForwardOptions& opts = {}) const;
  // Runs blocks l+1..L from an externally supplied h_l; used for gradient
  // oracles and for saliency checks that perturb an interior layer.
  ForwardTrace forward_from_layer(std::size_t l, const Matrix& h,
                                  const std::vector<std::uint8_t>& mask,
                                  const ForwardOptions& opts = {}) const;

  // LM-head logits for any layer output, outside any tape.
  Matrix lm_logits(const Matrix& h) const;

 private:
  ModelConfig cfg_;
};

Model init_model(const ModelConfig& cfg);

// P_hat = softmax_rows(lm_head(h)): an n x V right stochastic matrix.
Matrix lm_decode(const Model& m, const Matrix& h);

BoundModel bind_model(Tape& tape, const Model& m);
SeqNodes forward_on(Tape& tape, const BoundModel& bm, const ModelConfig& cfg,
                    const std::vector<TokenId>& ids, const std::vector<std::uint8_t>& mask,
                    const ForwardOptions& opts);
// Variant that starts from an existing node holding h_l.
SeqNodes forward_from_node(Tape& tape, const BoundModel& bm, const ModelConfig& cfg,
                           NodeId h_l, std::size_t l, const std::vector<std::uint8_t>& mask,
                           const ForwardOptions& opts);

}  // namespace decsal
