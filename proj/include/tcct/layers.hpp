#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "tcct/ops.hpp"
#include "tcct/tensor.hpp"

namespace tcct {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Non-learnable state persisted alongside parameters (batch-norm running
// statistics).
struct NamedBuffer {
  std::string name;
  std::vector<double>* values;
};

using ParameterList = std::vector<NamedTensor>;
using BufferList = std::vector<NamedBuffer>;

// Training/eval switch plus the randomness source for dropout.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

// Uniform in +-sqrt(1/fan_in).
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

struct Conv2DParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  Stride2D stride;
  Padding2D padding;
  Tensor weights;  // [out, in, kh, kw]
  Tensor bias;     // [out]

  static Conv2DParams create(std::size_t in_channels, std::size_t out_channels,
                             std::size_t kernel_h, std::size_t kernel_w, Rng& rng,
                             Stride2D stride = {}, Padding2D padding = {});
  void validate() const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct BatchNormParams {
  Tensor scale;  // [C], starts at 1
  Tensor shift;  // [C], starts at 0
  BatchNormStats stats;

  static BatchNormParams create(std::size_t channels, double momentum = 0.1,
                                double epsilon = 1e-5);
  void collect(ParameterList& out, const std::string& prefix) const;
  void collect_buffers(BufferList& out, const std::string& prefix);
};

struct LinearParams {
  Tensor weights;  // [in, out]
  Tensor bias;     // [out]

  static LinearParams create(std::size_t in, std::size_t out, Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
  double epsilon = 1e-5;

  static LayerNormParams create(std::size_t dim);
  void collect(ParameterList& out, const std::string& prefix) const;
};

Tensor conv2d(const Tensor& input, const Conv2DParams& params);
Tensor batch_norm(const Tensor& input, BatchNormParams& params, bool training);
Tensor linear(const Tensor& input, const LinearParams& params);
Tensor layer_norm(const Tensor& input, const LayerNormParams& params);

}  // namespace tcct
