#include "decsal/model.hpp"

#include <cmath>
#include <random>

#include "decsal/errors.hpp"

namespace decsal {

namespace {
constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;
constexpr double kMaskBias = -1e9;  // underflows to exactly zero after softmax
}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < kNumSpecials + 1) {
    throw ConfigError("model: vocab_size must be at least " + std::to_string(kNumSpecials + 1));
  }
  if (hidden == 0 || heads == 0 || hidden % heads != 0) {
    throw ConfigError("model: hidden (" + std::to_string(hidden) +
                      ") must be a positive multiple of heads (" + std::to_string(heads) + ")");
  }
  if (layers < 1) throw ConfigError("model: need at least one transformer block");
  if (classes < 2) throw ConfigError("model: need at least two classes");
  if (n_max < 3) throw ConfigError("model: n_max must be at least 3");
}

Model::Model(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t v = cfg.vocab_size, k = cfg.hidden, f = cfg.ff_hidden(), c = cfg.classes;
  tok_embed = Matrix(v, k);
  pos_embed = Matrix(cfg.n_max, k);
  blocks.resize(cfg.layers);
  for (auto& b : blocks) {
    b.wq = Matrix(k, k);
    b.wk = Matrix(k, k);
    b.wv = Matrix(k, k);
    b.wo = Matrix(k, k);
    b.bo = Matrix(1, k);
    b.ff1 = Matrix(k, f);
    b.bf1 = Matrix(1, f);
    b.ff2 = Matrix(f, k);
    b.bf2 = Matrix(1, k);
    b.ln1_gain = Matrix(1, k, 1.0);
    b.ln1_bias = Matrix(1, k);
    b.ln2_gain = Matrix(1, k, 1.0);
    b.ln2_bias = Matrix(1, k);
  }
  lm_head.dense = Matrix(k, k);
  lm_head.dense_bias = Matrix(1, k);
  lm_head.ln_gain = Matrix(1, k, 1.0);
  lm_head.ln_bias = Matrix(1, k);
  lm_head.proj = Matrix(k, v);
  lm_head.proj_bias = Matrix(1, v);
  classifier.w = Matrix(k, c);
  classifier.b = Matrix(1, c);
}

std::vector<ParamRef> Model::parameters() {
  std::vector<ParamRef> out;
  auto push = [&out](std::string name, Matrix& m, bool lm = false, bool emb = false) {
    out.push_back({std::move(name), &m, lm, emb});
  };
  push("tok_embed", tok_embed, false, true);
  push("pos_embed", pos_embed);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    auto& b = blocks[l];
    const std::string p = "block" + std::to_string(l) + ".";
    push(p + "wq", b.wq);
    push(p + "wk", b.wk);
    push(p + "wv", b.wv);
    push(p + "wo", b.wo);
    push(p + "bo", b.bo);
    push(p + "ff1", b.ff1);
    push(p + "bf1", b.bf1);
    push(p + "ff2", b.ff2);
    push(p + "bf2", b.bf2);
    push(p + "ln1_gain", b.ln1_gain);
    push(p + "ln1_bias", b.ln1_bias);
    push(p + "ln2_gain", b.ln2_gain);
    push(p + "ln2_bias", b.ln2_bias);
  }
  push("lm_head.dense", lm_head.dense, true);
  push("lm_head.dense_bias", lm_head.dense_bias, true);
  push("lm_head.ln_gain", lm_head.ln_gain, true);
  push("lm_head.ln_bias", lm_head.ln_bias, true);
  push("lm_head.proj", lm_head.proj, true);
  push("lm_head.proj_bias", lm_head.proj_bias, true);
  push("classifier.w", classifier.w);
  push("classifier.b", classifier.b);
  return out;
}

std::vector<ConstParamRef> Model::parameters() const {
  std::vector<ConstParamRef> out;
  auto& self = const_cast<Model&>(*this);
  for (const auto& p : self.parameters()) out.push_back({p.name, p.value, p.lm_head, p.embedding});
  return out;
}

Model init_model(const ModelConfig& cfg) {
  Model m(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (auto& p : m.parameters()) {
    // Layer-norm gains stay exactly 1, every bias exactly 0.
    const bool is_gain = p.name.ends_with("gain");
    const bool is_bias = p.name.ends_with("bias") || p.name.ends_with(".bo") ||
                         p.name.ends_with(".bf1") || p.name.ends_with(".bf2") ||
                         p.name == "classifier.b";
    if (is_gain || is_bias) continue;
    double* data = p.value->data();
    for (std::size_t i = 0; i < p.value->size(); ++i) data[i] = normal(rng);
  }
  return m;
}

BoundModel bind_model(Tape& tape, const Model& m) {
  BoundModel bm;
  for (const auto& p : m.parameters()) {
    bm.ordered.push_back(tape.leaf(*p.value));
  }
  std::size_t i = 0;
  auto next = [&]() { return bm.ordered[i++]; };
  bm.tok_embed = next();
  bm.pos_embed = next();
  bm.blocks.resize(m.blocks.size());
  for (auto& b : bm.blocks) {
    b.wq = next();
    b.wk = next();
    b.wv = next();
    b.wo = next();
    b.bo = next();
    b.ff1 = next();
    b.bf1 = next();
    b.ff2 = next();
    b.bf2 = next();
    b.ln1_gain = next();
    b.ln1_bias = next();
    b.ln2_gain = next();
    b.ln2_bias = next();
  }
  bm.lm_dense = next();
  bm.lm_dense_bias = next();
  bm.lm_ln_gain = next();
  bm.lm_ln_bias = next();
  bm.lm_proj = next();
  bm.lm_proj_bias = next();
  bm.cls_w = next();
  bm.cls_b = next();
  return bm;
}

namespace {

NodeId encoder_block(Tape& t, const BoundModel::Block& b, const ModelConfig& cfg, NodeId x,
                     NodeId key_bias, std::vector<NodeId>* attention_out) {
  const std::size_t d = cfg.head_dim();
  NodeId q = t.matmul(x, b.wq);
  NodeId k = t.matmul(x, b.wk);
  NodeId v = t.matmul(x, b.wv);
  std::vector<NodeId> head_ctx;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    NodeId qh = t.slice_cols(q, h * d, (h + 1) * d);
    NodeId kh = t.slice_cols(k, h * d, (h + 1) * d);
    NodeId vh = t.slice_cols(v, h * d, (h + 1) * d);
    NodeId scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(d)));
    NodeId attn = t.softmax_rows(t.add_row(scores, key_bias));
    if (attention_out) attention_out->push_back(attn);
    head_ctx.push_back(t.matmul(attn, vh));
  }
  NodeId ctx = cfg.heads == 1 ? head_ctx[0] : t.concat_cols(head_ctx);
  NodeId attn_out = t.add_row(t.matmul(ctx, b.wo), b.bo);
  NodeId x1 = t.layer_norm(t.add(x, attn_out), b.ln1_gain, b.ln1_bias, kLayerNormEps);
  NodeId ff = t.add_row(t.matmul(t.gelu(t.add_row(t.matmul(x1, b.ff1), b.bf1)), b.ff2), b.bf2);
  return t.layer_norm(t.add(x1, ff), b.ln2_gain, b.ln2_bias, kLayerNormEps);
}

NodeId lm_head_on(Tape& t, const BoundModel& bm, const ModelConfig& cfg, NodeId h) {
  NodeId dense = t.add_row(t.matmul(h, bm.lm_dense), bm.lm_dense_bias);
  NodeId normed = t.layer_norm(t.gelu(dense), bm.lm_ln_gain, bm.lm_ln_bias, kLayerNormEps);
  NodeId proj = cfg.tie_lm_embedding ? t.matmul_nt(normed, bm.tok_embed)
                                     : t.matmul(normed, bm.lm_proj);
  return t.add_row(proj, bm.lm_proj_bias);
}

NodeId key_bias_leaf(Tape& t, const std::vector<std::uint8_t>& mask) {
  Matrix bias(1, mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j) bias(0, j) = mask[j] ? 0.0 : kMaskBias;
  return t.leaf(std::move(bias));
}

SeqNodes run_stack(Tape& t, const BoundModel& bm, const ModelConfig& cfg, NodeId h,
                   std::size_t first_block, const std::vector<std::uint8_t>& mask,
                   const ForwardOptions& opts) {
  SeqNodes nodes;
  nodes.layers.push_back(h);
  NodeId key_bias = key_bias_leaf(t, mask);
  for (std::size_t l = first_block; l < cfg.layers; ++l) {
    std::vector<NodeId> attn;
    h = encoder_block(t, bm.blocks[l], cfg, h, key_bias, &attn);
    nodes.layers.push_back(h);
    nodes.attention.push_back(std::move(attn));
  }
  if (opts.want_classifier) {
    NodeId cls_state = t.gather_rows(h, {0});
    nodes.class_logits = t.add_row(t.matmul(cls_state, bm.cls_w), bm.cls_b);
  }
  if (opts.want_lm_logits) nodes.lm_logits = lm_head_on(t, bm, cfg, h);
  return nodes;
}

}  // namespace

SeqNodes forward_on(Tape& tape, const BoundModel& bm, const ModelConfig& cfg,
                    const std::vector<TokenId>& ids, const std::vector<std::uint8_t>& mask,
                    const ForwardOptions& opts) {
  if (ids.size() > cfg.n_max) {
    throw DataError("forward: sequence of length " + std::to_string(ids.size()) +
                    " exceeds n_max " + std::to_string(cfg.n_max));
  }
  if (ids.size() != mask.size() || ids.empty()) {
    throw DataError("forward: ids and mask lengths disagree");
  }
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw DataError("forward: token id " + std::to_string(id) + " out of vocabulary");
    }
  }
  std::vector<std::int32_t> id_rows(ids.begin(), ids.end());
  std::vector<std::int32_t> pos_rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) pos_rows[i] = static_cast<std::int32_t>(i);
  NodeId h0 = tape.add(tape.gather_rows(bm.tok_embed, id_rows),
                       tape.gather_rows(bm.pos_embed, pos_rows));
  return run_stack(tape, bm, cfg, h0, 0, mask, opts);
}

SeqNodes forward_from_node(Tape& tape, const BoundModel& bm, const ModelConfig& cfg, NodeId h_l,
                           std::size_t l, const std::vector<std::uint8_t>& mask,
                           const ForwardOptions& opts) {
  if (l > cfg.layers) {
    throw DataError("forward_from_node: layer " + std::to_string(l) + " out of range 0.." +
                    std::to_string(cfg.layers));
  }
  return run_stack(tape, bm, cfg, h_l, l, mask, opts);
}

ForwardTrace Model::forward(const TokenSeq& t, const ForwardOptions& opts) const {
  ForwardTrace trace;
  trace.bound = bind_model(trace.tape, *this);
  trace.nodes = forward_on(trace.tape, trace.bound, cfg_, t.ids, t.mask, opts);
  return trace;
}

ForwardTrace Model::forward_from_layer(std::size_t l, const Matrix& h,
                                       const std::vector<std::uint8_t>& mask,
                                       const ForwardOptions& opts) const {
  if (h.cols() != cfg_.hidden || h.rows() != mask.size()) {
    throw DataError("forward_from_layer: state must be n x K with one mask flag per row, got " +
                    h.shape_str());
  }
  ForwardTrace trace;
  trace.bound = bind_model(trace.tape, *this);
  NodeId leaf = trace.tape.leaf(h);
  trace.nodes = forward_from_node(trace.tape, trace.bound, cfg_, leaf, l, mask, opts);
  return trace;
}

int ForwardTrace::predicted_class() const {
  const Matrix& logits = class_logits();
  return static_cast<int>(argmax_row(logits, 0));
}

std::vector<double> ForwardTrace::class_probs() const {
  Matrix p = decsal::softmax_rows(class_logits());
  return std::vector<double>(p.data(), p.data() + p.cols());
}

Matrix Model::lm_logits(const Matrix& h) const {
  if (h.cols() != cfg_.hidden) {
    throw DimensionError("lm_logits: state width " + std::to_string(h.cols()) +
                         " does not match hidden " + std::to_string(cfg_.hidden));
  }
  Matrix dense = matmul(h, lm_head.dense);
  for (std::size_t i = 0; i < dense.rows(); ++i)
    for (std::size_t j = 0; j < dense.cols(); ++j) dense(i, j) += lm_head.dense_bias(0, j);
  double* p = dense.data();
  for (std::size_t i = 0; i < dense.size(); ++i) p[i] = gelu_scalar(p[i]);
  Matrix normed = layer_norm(dense, lm_head.ln_gain, lm_head.ln_bias, kLayerNormEps);
  Matrix logits =
      cfg_.tie_lm_embedding ? matmul_nt(normed, tok_embed) : matmul(normed, lm_head.proj);
  for (std::size_t i = 0; i < logits.rows(); ++i)
    for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += lm_head.proj_bias(0, j);
  return logits;
}

Matrix lm_decode(const Model& m, const Matrix& h) { return softmax_rows(m.lm_logits(h)); }

}  // namespace decsal
