#include "tcct/stream_tc.hpp"

#include <stdexcept>
#include <string>

namespace tcct::model {

void TCConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("tc.") + name + " must be >= 1");
  };
  positive(features, "features");
  positive(scales, "scales");
  positive(conv1_channels, "conv1_channels");
  positive(conv1_kernel, "conv1_kernel");
  positive(pool_kernel, "pool_kernel");
  positive(pool_stride, "pool_stride");
  positive(conv2_channels, "conv2_channels");
  positive(conv2_kernel, "conv2_kernel");
  positive(dense_hidden, "dense_hidden");
  positive(num_classes, "num_classes");
  if (conv2_kernel > scales) {
    throw std::invalid_argument("tc.conv2_kernel (" + std::to_string(conv2_kernel) +
                                ") exceeds the scale count " + std::to_string(scales));
  }
  if (pool_kernel > signal_length) {
    throw std::invalid_argument("tc.pool_kernel exceeds the signal length");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("tc.dropout must be in [0, 1)");
}

Padding2D TCConfig::conv1_padding() const {
  const std::size_t total = conv1_kernel - 1;
  const std::size_t left = total / 2;
  return Padding2D{0, 0, left, total - left};
}

std::size_t TCConfig::pooled_width() const {
  return conv_out_size(signal_length, 0, pool_kernel, pool_stride);
}

Tensor tc_transform(std::span<const SignalMatrix> batch, const wavelet::CwtPlan& plan) {
  if (batch.empty()) throw std::invalid_argument("tc_transform needs a nonempty batch");
  const std::size_t f = batch.front().features;
  const std::size_t s = plan.scales(), t = plan.length();
  std::vector<double> data(batch.size() * f * s * t);
  const std::size_t block = f * s * t;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& m = batch[i];
    if (m.features != f) {
      throw ShapeError("tc_transform: sample " + std::to_string(i) + " has " +
                       std::to_string(m.features) + " features, expected " + std::to_string(f));
    }
    if (m.length != t) {
      throw ShapeError("tc_transform: sample " + std::to_string(i) + " has length " +
                       std::to_string(m.length) + ", plan expects " + std::to_string(t));
    }
    for (std::size_t r = 0; r < f; ++r) {
      plan.magnitudes(m.row(r), std::span<double>(data).subspan(i * block + r * s * t, s * t));
    }
  }
  return Tensor({batch.size(), f, s, t}, std::move(data), false);
}

Tensor stack_scalograms(std::span<const std::vector<double>* const> blocks, std::size_t features,
                        std::size_t scales, std::size_t length) {
  const std::size_t block = features * scales * length;
  std::vector<double> data;
  data.reserve(blocks.size() * block);
  for (const auto* b : blocks) {
    if (b->size() != block) throw ShapeError("stack_scalograms: block size mismatch");
    data.insert(data.end(), b->begin(), b->end());
  }
  return Tensor({blocks.size(), features, scales, length}, std::move(data), false);
}

TCStream::TCStream(const TCConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const auto& c = config_;
  conv1_ = Conv2DParams::create(c.features, c.conv1_channels, 1, c.conv1_kernel, rng, {1, 1},
                                c.conv1_padding());
  norm1_ = BatchNormParams::create(c.conv1_channels);
  conv2_ = Conv2DParams::create(c.conv1_channels, c.conv2_channels, c.conv2_kernel, 1, rng);
  norm2_ = BatchNormParams::create(c.conv2_channels);
  adjust_ = LinearParams::create(c.conv2_channels, c.dense_hidden, rng);
  dense_hidden_ = LinearParams::create(c.dense_hidden, c.dense_hidden, rng);
  dense_out_ = LinearParams::create(c.dense_hidden, c.num_classes, rng);
}

Tensor TCStream::feature_map(const Tensor& input, const ForwardContext& ctx) {
  if (input.ndim() != 4 || input.dim(1) != config_.features || input.dim(2) != config_.scales) {
    throw ShapeError("tc stream expects [N, " + std::to_string(config_.features) + ", " +
                     std::to_string(config_.scales) + ", T] input, got " + shape_str(input.shape()));
  }
  Tensor x = conv2d(input, conv1_);
  x = elu(batch_norm(x, norm1_, ctx.training));
  x = avg_pool2d(x, 1, config_.pool_kernel, {1, config_.pool_stride});
  x = conv2d(x, conv2_);
  return elu(batch_norm(x, norm2_, ctx.training));
}

Tensor TCStream::forward(const Tensor& input, const ForwardContext& ctx) {
  Tensor x = global_avg_pool2d(feature_map(input, ctx));
  x = dropout(elu(linear(x, adjust_)), config_.dropout, ctx.training, ctx.rng);
  x = dropout(elu(linear(x, dense_hidden_)), config_.dropout, ctx.training, ctx.rng);
  return linear(x, dense_out_);
}

Tensor TCStream::infer(const Tensor& input) const {
  // Eval mode reads running statistics only, so the cast cannot cause a write.
  return const_cast<TCStream*>(this)->forward(input, ForwardContext{});
}

void TCStream::collect_parameters(ParameterList& out) const {
  conv1_.collect(out, "tc.conv1");
  norm1_.collect(out, "tc.norm1");
  conv2_.collect(out, "tc.conv2");
  norm2_.collect(out, "tc.norm2");
  adjust_.collect(out, "tc.adjust");
  dense_hidden_.collect(out, "tc.dense_hidden");
  dense_out_.collect(out, "tc.dense_out");
}

void TCStream::collect_buffers(BufferList& out) {
  norm1_.collect_buffers(out, "tc.norm1");
  norm2_.collect_buffers(out, "tc.norm2");
}

}  // namespace tcct::model
