#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcct/layers.hpp"

namespace tcct::model {

// How the weighted stream outputs are combined before normalization.
enum class FusionMode {
  Logits,         // softmax(w_ct * ct + w_tc * tc)
  Probabilities,  // normalize(w_ct * softmax(ct) + w_tc * softmax(tc))
};

struct FusionWeights {
  Tensor w_ct;
  Tensor w_tc;

  static FusionWeights create(double initial = 0.5);
  void collect(ParameterList& out, bool ct, bool tc) const;
};

struct LossConfig {
  double lambda = 0.01;
  std::size_t num_classes = 4;
  FusionMode mode = FusionMode::Logits;

  void validate() const;
};

struct FusedOutput {
  // Scores whose row-wise softmax equals `probs`.
  Tensor logits;
  Tensor probs;
};

// Either stream may be an undefined tensor (single-stream ablation); its
// term is then dropped.
FusedOutput fuse(const Tensor& logits_ct, const Tensor& logits_tc, const FusionWeights& weights,
                 FusionMode mode = FusionMode::Logits);

// Mean cross-entropy over the batch plus (lambda / N_b) * sum of squared
// parameters.
Tensor combined_loss(const FusedOutput& fused, std::span<const int> labels,
                     const ParameterList& parameters, const LossConfig& config);

// Row-wise argmax; ties go to the lowest class index.
std::vector<int> predict(const Tensor& probs);

}  // namespace tcct::model
