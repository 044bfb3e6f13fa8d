#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcct/layers.hpp"
#include "tcct/signal.hpp"
#include "tcct/wavelet.hpp"

namespace tcct::model {

// Temporal-frequency stream hyperparameters.
struct TCConfig {
  std::size_t features = 2;
  std::size_t scales = 32;
  std::size_t signal_length = 280;
  std::size_t conv1_channels = 16;
  std::size_t conv1_kernel = 10;  // along time, padded to keep the length
  std::size_t pool_kernel = 15;
  std::size_t pool_stride = 15;
  std::size_t conv2_channels = 32;
  std::size_t conv2_kernel = 2;  // along scale, no padding
  std::size_t dense_hidden = 64;
  double dropout = 0.3;
  std::size_t num_classes = 4;

  void validate() const;
  // Left/right zero padding that preserves the time length for conv1.
  Padding2D conv1_padding() const;
  std::size_t pooled_width() const;
  std::size_t conv2_height() const { return scales - conv2_kernel + 1; }
};

// Scalogram magnitudes of every sample, stacked so feature scalograms become
// input channels: [N, F, S, T]. The result carries no gradient.
Tensor tc_transform(std::span<const SignalMatrix> batch, const wavelet::CwtPlan& plan);

// Concatenates per-sample [F * S * T] magnitude blocks into [N, F, S, T].
Tensor stack_scalograms(std::span<const std::vector<double>* const> blocks, std::size_t features,
                        std::size_t scales, std::size_t length);

class TCStream {
 public:
  TCStream(const TCConfig& config, Rng& rng);

  const TCConfig& config() const { return config_; }

  // input[N, F, S, T] -> raw class scores [N, num_classes]
  Tensor forward(const Tensor& input, const ForwardContext& ctx);
  Tensor infer(const Tensor& input) const;
  // Output of the second convolution block before global pooling.
  Tensor feature_map(const Tensor& input, const ForwardContext& ctx);

  void collect_parameters(ParameterList& out) const;
  void collect_buffers(BufferList& out);

 private:
  TCConfig config_;
  Conv2DParams conv1_;
  BatchNormParams norm1_;
  Conv2DParams conv2_;
  BatchNormParams norm2_;
  LinearParams adjust_;
  LinearParams dense_hidden_;
  LinearParams dense_out_;
};

}  // namespace tcct::model
