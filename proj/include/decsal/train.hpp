#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "decsal/model.hpp"
#include "decsal/vocab.hpp"

namespace decsal {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction; state rows follow the parameter list order.
class Adam {
 public:
  Adam(const std::vector<ParamRef>& params, AdamOptions opts);
  void step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
            const std::vector<bool>& update_mask);

 private:
  AdamOptions opts_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

struct MlmOptions {
  std::size_t epochs = 1;
  double lr = 1e-3;
  double mask_rate = 0.15;   // chance a content position is selected for prediction
  double keep_rate = 0.0;    // of selected: input token left visible
  double random_rate = 0.0;  // of selected: input token replaced by a random content token
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
};

struct MlmReport {
  std::vector<double> epoch_loss;  // mean masked cross-entropy per epoch
};

MlmReport pretrain_mlm(Model& m, const std::vector<TokenSeq>& corpus, const MlmOptions& opts);

struct LabelledSeq {
  TokenSeq seq;
  int label = 0;
};

struct FinetuneOptions {
  std::size_t epochs = 1;
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool freeze_base = false;  // update only the classifier head
};

struct FinetuneReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // training accuracy at forward time
};

// The LM head is excluded from the update set; its weights are bit-identical
// before and after.
FinetuneReport finetune_classifier(Model& m, const std::vector<LabelledSeq>& data,
                                   const FinetuneOptions& opts);

// One masking pass over a sequence: modified ids plus the selected positions
// and their original tokens. Exposed for evaluation of reconstruction rates.
struct MaskedExample {
  std::vector<TokenId> ids;
  std::vector<std::int32_t> targets;   // per position; original token at selected positions
  std::vector<std::int32_t> selected;  // positions carrying loss
};
MaskedExample apply_mlm_mask(const TokenSeq& seq, std::size_t vocab_size, const MlmOptions& opts,
                             std::mt19937_64& rng);

}  // namespace decsal
