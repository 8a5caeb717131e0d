#include "decsal/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "decsal/errors.hpp"

namespace decsal {

Adam::Adam(const std::vector<ParamRef>& params, AdamOptions opts) : opts_(opts) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.value->rows(), p.value->cols());
    v_.emplace_back(p.value->rows(), p.value->cols());
  }
}

void Adam::step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
                const std::vector<bool>& update_mask) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!update_mask[i]) continue;
    Matrix& w = *params[i].value;
    const Matrix& g = grads[i];
    double* pm = m_[i].data();
    double* pv = v_[i].data();
    double* pw = w.data();
    const double* pg = g.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      pm[j] = opts_.beta1 * pm[j] + (1.0 - opts_.beta1) * pg[j];
      pv[j] = opts_.beta2 * pv[j] + (1.0 - opts_.beta2) * pg[j] * pg[j];
      const double mhat = pm[j] / bc1;
      const double vhat = pv[j] / bc2;
      pw[j] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

MaskedExample apply_mlm_mask(const TokenSeq& seq, std::size_t vocab_size, const MlmOptions& opts,
                             std::mt19937_64& rng) {
  MaskedExample out;
  out.ids = seq.ids;
  out.targets.assign(seq.ids.size(), 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto content = seq.content_positions();
  for (std::size_t pos : content) {
    if (unit(rng) >= opts.mask_rate) continue;
    out.selected.push_back(static_cast<std::int32_t>(pos));
  }
  if (out.selected.empty() && !content.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, content.size() - 1);
    out.selected.push_back(static_cast<std::int32_t>(content[pick(rng)]));
  }
  std::uniform_int_distribution<std::int32_t> random_token(
      static_cast<std::int32_t>(kNumSpecials), static_cast<std::int32_t>(vocab_size) - 1);
  for (std::int32_t pos : out.selected) {
    const auto p = static_cast<std::size_t>(pos);
    out.targets[p] = seq.ids[p];
    const double u = unit(rng);
    if (u < opts.keep_rate) {
      // visible token, still predicted
    } else if (u < opts.keep_rate + opts.random_rate) {
      out.ids[p] = random_token(rng);
    } else {
      out.ids[p] = kMaskId;
    }
  }
  return out;
}

namespace {

void validate_mlm_options(const MlmOptions& opts) {
  if (!(opts.mask_rate > 0.0 && opts.mask_rate < 1.0)) {
    throw ConfigError("pretrain: mask_rate must lie in (0,1), got " +
                      std::to_string(opts.mask_rate));
  }
  if (opts.keep_rate < 0.0 || opts.random_rate < 0.0 ||
      opts.keep_rate + opts.random_rate > 1.0) {
    throw ConfigError("pretrain: keep_rate + random_rate must stay within [0,1]");
  }
  if (opts.batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
}

std::vector<Matrix> collect_grads(const Tape::Adjoints& adj, const BoundModel& bm) {
  std::vector<Matrix> grads;
  grads.reserve(bm.ordered.size());
  for (NodeId id : bm.ordered) grads.push_back(adj.get(id));
  return grads;
}

NodeId mean_of(Tape& tape, const std::vector<NodeId>& losses) {
  NodeId total = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) total = tape.add(total, losses[i]);
  return tape.scale(total, 1.0 / static_cast<double>(losses.size()));
}

}  // namespace

MlmReport pretrain_mlm(Model& m, const std::vector<TokenSeq>& corpus, const MlmOptions& opts) {
  validate_mlm_options(opts);
  if (corpus.empty()) throw DataError("pretrain: empty corpus");
  auto params = m.parameters();
  Adam adam(params, AdamOptions{.lr = opts.lr});
  std::vector<bool> update_all(params.size(), true);
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  MlmReport report;
  const ForwardOptions fwd{.want_classifier = false, .want_lm_logits = true};
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opts.batch_size);
      Tape tape;
      BoundModel bm = bind_model(tape, m);
      std::vector<NodeId> losses;
      for (std::size_t i = start; i < stop; ++i) {
        const TokenSeq& seq = corpus[order[i]];
        if (seq.content_positions().empty()) continue;
        MaskedExample ex = apply_mlm_mask(seq, m.config().vocab_size, opts, rng);
        SeqNodes nodes = forward_on(tape, bm, m.config(), ex.ids, seq.mask, fwd);
        losses.push_back(tape.cross_entropy(nodes.lm_logits, ex.targets, ex.selected));
      }
      if (losses.empty()) continue;
      NodeId batch_loss = mean_of(tape, losses);
      const double loss_value = tape.value(batch_loss)(0, 0);
      if (!std::isfinite(loss_value)) {
        throw NumericError("pretrain: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss_value;
      ++batches;
      auto adjoints = tape.backward(batch_loss);
      adam.step(params, collect_grads(adjoints, bm), update_all);
    }
    if (batches == 0) throw DataError("pretrain: corpus has no content tokens");
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  m.lm_pretrained = true;
  return report;
}

FinetuneReport finetune_classifier(Model& m, const std::vector<LabelledSeq>& data,
                                   const FinetuneOptions& opts) {
  if (data.empty()) throw DataError("finetune: empty dataset");
  for (const auto& ex : data) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= m.config().classes) {
      throw DataError("finetune: label " + std::to_string(ex.label) + " outside 0.." +
                      std::to_string(m.config().classes - 1));
    }
  }
  if (opts.batch_size == 0) throw ConfigError("finetune: batch_size must be positive");

  auto params = m.parameters();
  Adam adam(params, AdamOptions{.lr = opts.lr});
  std::vector<bool> update(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const bool classifier_only = params[i].name.rfind("classifier.", 0) == 0;
    update[i] = opts.freeze_base ? classifier_only : !params[i].lm_head;
    // A tied LM projection reads the token embedding, so the embedding must
    // freeze with the head to keep the pretrained decoder intact.
    if (m.config().tie_lm_embedding && params[i].embedding) update[i] = false;
  }

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  FinetuneReport report;
  const ForwardOptions fwd{.want_classifier = true, .want_lm_logits = false};
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0, correct = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opts.batch_size);
      Tape tape;
      BoundModel bm = bind_model(tape, m);
      std::vector<NodeId> losses;
      for (std::size_t i = start; i < stop; ++i) {
        const auto& ex = data[order[i]];
        SeqNodes nodes = forward_on(tape, bm, m.config(), ex.seq.ids, ex.seq.mask, fwd);
        losses.push_back(tape.cross_entropy(nodes.class_logits, {ex.label}, {0}));
        if (argmax_row(tape.value(nodes.class_logits), 0) == static_cast<std::size_t>(ex.label)) {
          ++correct;
        }
      }
      NodeId batch_loss = mean_of(tape, losses);
      const double loss_value = tape.value(batch_loss)(0, 0);
      if (!std::isfinite(loss_value)) {
        throw NumericError("finetune: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss_value;
      ++batches;
      auto adjoints = tape.backward(batch_loss);
      adam.step(params, collect_grads(adjoints, bm), update);
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    report.epoch_accuracy.push_back(static_cast<double>(correct) /
                                    static_cast<double>(data.size()));
  }
  return report;
}

}  // namespace decsal
