#include "tcct/fusion.hpp"

#include <stdexcept>
#include <string>

namespace tcct::model {

FusionWeights FusionWeights::create(double initial) {
  return FusionWeights{Tensor::scalar(initial, true), Tensor::scalar(initial, true)};
}

void FusionWeights::collect(ParameterList& out, bool ct, bool tc) const {
  if (ct) out.push_back({"fusion.w_ct", w_ct});
  if (tc) out.push_back({"fusion.w_tc", w_tc});
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("loss.lambda must be >= 0");
  if (num_classes < 2) throw std::invalid_argument("loss.num_classes must be >= 2");
}

FusedOutput fuse(const Tensor& logits_ct, const Tensor& logits_tc, const FusionWeights& weights,
                 FusionMode mode) {
  if (!logits_ct.defined() && !logits_tc.defined()) {
    throw std::invalid_argument("fuse needs at least one stream");
  }
  if (logits_ct.defined() && logits_tc.defined() && logits_ct.shape() != logits_tc.shape()) {
    throw ShapeError("fuse: stream outputs " + shape_str(logits_ct.shape()) + " and " +
                     shape_str(logits_tc.shape()) + " differ");
  }
  auto term = [&](const Tensor& scores, const Tensor& w) {
    return mode == FusionMode::Logits ? scale_by(scores, w) : scale_by(softmax(scores, -1), w);
  };
  Tensor combined;
  if (logits_ct.defined()) combined = term(logits_ct, weights.w_ct);
  if (logits_tc.defined()) {
    Tensor t = term(logits_tc, weights.w_tc);
    combined = combined.defined() ? add(combined, t) : t;
  }
  FusedOutput out;
  // log of the weighted probability mixture; its softmax renormalizes rows
  out.logits = mode == FusionMode::Logits ? combined : log(combined);
  out.probs = softmax(out.logits, -1);
  return out;
}

Tensor combined_loss(const FusedOutput& fused, std::span<const int> labels,
                     const ParameterList& parameters, const LossConfig& config) {
  config.validate();
  if (fused.logits.ndim() != 2 || fused.logits.dim(1) != config.num_classes) {
    throw ShapeError("combined_loss: expected [N, " + std::to_string(config.num_classes) +
                     "] scores, got " + shape_str(fused.logits.shape()));
  }
  Tensor loss = cross_entropy(fused.logits, labels);
  if (config.lambda > 0.0 && !parameters.empty()) {
    Tensor l2;
    for (const auto& p : parameters) {
      Tensor sq = sum_squares(p.tensor);
      l2 = l2.defined() ? add(l2, sq) : sq;
    }
    const double n_b = static_cast<double>(fused.logits.dim(0));
    loss = add(loss, scale(l2, config.lambda / n_b));
  }
  return loss;
}

std::vector<int> predict(const Tensor& probs) {
  if (probs.ndim() != 2) throw ShapeError("predict: expected [N, C], got " + shape_str(probs.shape()));
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  const auto v = probs.values();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (v[i * c + j] > v[i * c + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace tcct::model
