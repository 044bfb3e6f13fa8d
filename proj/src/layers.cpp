#include "tcct/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace tcct {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

Conv2DParams Conv2DParams::create(std::size_t in_channels, std::size_t out_channels,
                                  std::size_t kernel_h, std::size_t kernel_w, Rng& rng,
                                  Stride2D stride, Padding2D padding) {
  Conv2DParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.kernel_h = kernel_h;
  p.kernel_w = kernel_w;
  p.stride = stride;
  p.padding = padding;
  const std::size_t fan_in = in_channels * kernel_h * kernel_w;
  p.weights = uniform_init({out_channels, in_channels, kernel_h, kernel_w}, fan_in, rng);
  p.bias = uniform_init({out_channels}, fan_in, rng);
  p.validate();
  return p;
}

void Conv2DParams::validate() const {
  if (stride.h < 1 || stride.w < 1) throw std::invalid_argument("conv stride components must be >= 1");
  const Shape expected{out_channels, in_channels, kernel_h, kernel_w};
  if (weights.shape() != expected) {
    throw ShapeError("conv weights " + shape_str(weights.shape()) + " expected " +
                     shape_str(expected));
  }
  if (bias.shape() != Shape{out_channels}) {
    throw ShapeError("conv bias " + shape_str(bias.shape()) + " expected [" +
                     std::to_string(out_channels) + "]");
  }
}

void Conv2DParams::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weights});
  out.push_back({prefix + ".bias", bias});
}

BatchNormParams BatchNormParams::create(std::size_t channels, double momentum, double epsilon) {
  if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("batch-norm momentum must be in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("batch-norm epsilon must be positive");
  BatchNormParams p;
  p.scale = Tensor::full({channels}, 1.0, true);
  p.shift = Tensor::full({channels}, 0.0, true);
  p.stats.running_mean.assign(channels, 0.0);
  p.stats.running_var.assign(channels, 1.0);
  p.stats.momentum = momentum;
  p.stats.epsilon = epsilon;
  return p;
}

void BatchNormParams::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".scale", scale});
  out.push_back({prefix + ".shift", shift});
}

void BatchNormParams::collect_buffers(BufferList& out, const std::string& prefix) {
  out.push_back({prefix + ".running_mean", &stats.running_mean});
  out.push_back({prefix + ".running_var", &stats.running_var});
}

LinearParams LinearParams::create(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams p;
  p.weights = uniform_init({in, out}, in, rng);
  p.bias = uniform_init({out}, in, rng);
  return p;
}

void LinearParams::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weights});
  out.push_back({prefix + ".bias", bias});
}

LayerNormParams LayerNormParams::create(std::size_t dim) {
  LayerNormParams p;
  p.gamma = Tensor::full({dim}, 1.0, true);
  p.beta = Tensor::full({dim}, 0.0, true);
  return p;
}

void LayerNormParams::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Tensor conv2d(const Tensor& input, const Conv2DParams& params) {
  return conv2d(input, params.weights, params.bias, params.stride, params.padding);
}

Tensor batch_norm(const Tensor& input, BatchNormParams& params, bool training) {
  return batch_norm(input, params.scale, params.shift, params.stats, training);
}

Tensor linear(const Tensor& input, const LinearParams& params) {
  return linear(input, params.weights, params.bias);
}

Tensor layer_norm(const Tensor& input, const LayerNormParams& params) {
  return layer_norm(input, params.gamma, params.beta, params.epsilon);
}

}  // namespace tcct
