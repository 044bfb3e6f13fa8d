#include "tcct/stream_ct.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tcct::model {

void CTConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string("ct.") + name + " must be >= 1");
  };
  positive(features, "features");
  positive(temporal_filters, "temporal_filters");
  positive(temporal_kernel, "temporal_kernel");
  positive(pool_kernel, "pool_kernel");
  positive(pool_stride, "pool_stride");
  positive(embed_dim, "embed_dim");
  positive(heads, "heads");
  positive(ff_hidden, "ff_hidden");
  positive(dense_hidden, "dense_hidden");
  positive(num_classes, "num_classes");
  if (embed_dim % heads != 0) {
    throw std::invalid_argument("ct.heads (" + std::to_string(heads) + ") must divide ct.embed_dim (" +
                                std::to_string(embed_dim) + ")");
  }
  if (!(conv_dropout >= 0.0 && conv_dropout < 1.0)) throw std::invalid_argument("ct.conv_dropout must be in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("ct.dropout must be in [0, 1)");
  if (signal_length < temporal_kernel || conv_width() < pool_kernel) {
    throw std::invalid_argument("ct: signal length " + std::to_string(signal_length) +
                                " too short for the temporal kernel and pooling window");
  }
}

std::size_t CTConfig::conv_width() const { return signal_length - temporal_kernel + 1; }

std::size_t CTConfig::token_count() const {
  return conv_out_size(conv_width(), 0, pool_kernel, pool_stride);
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.ndim() != 3 || k.ndim() != 3 || q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
    throw ShapeError("attention: query " + shape_str(q.shape()) + " and key " +
                     shape_str(k.shape()) + " disagree");
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  return softmax(scale(bmm(q, transpose_last2(k)), inv_scale), -1);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.ndim() != 3 || v.dim(0) != k.dim(0) || v.dim(1) != k.dim(1)) {
    throw ShapeError("attention: value " + shape_str(v.shape()) + " does not match key " +
                     shape_str(k.shape()));
  }
  return bmm(attention_weights(q, k), v);
}

MultiHeadAttentionParams MultiHeadAttentionParams::create(std::size_t dim, std::size_t heads,
                                                          Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("attention heads (" + std::to_string(heads) +
                                ") must divide the embedding dimension (" + std::to_string(dim) + ")");
  }
  MultiHeadAttentionParams p;
  p.heads = heads;
  p.query = LinearParams::create(dim, dim, rng);
  p.key = LinearParams::create(dim, dim, rng);
  p.value = LinearParams::create(dim, dim, rng);
  p.output = LinearParams::create(dim, dim, rng);
  return p;
}

void MultiHeadAttentionParams::collect(ParameterList& out, const std::string& prefix) const {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  output.collect(out, prefix + ".output");
}

namespace {

// [N, T, d] -> [N*h, T, d/h]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t n = x.dim(0), t = x.dim(1), d = x.dim(2), dk = d / heads;
  return reshape(permute(reshape(x, {n, t, heads, dk}), {0, 2, 1, 3}), {n * heads, t, dk});
}

// [N*h, T, d/h] -> [N, T, d]
Tensor merge_heads(const Tensor& x, std::size_t n, std::size_t heads) {
  const std::size_t t = x.dim(1), dk = x.dim(2);
  return reshape(permute(reshape(x, {n, heads, t, dk}), {0, 2, 1, 3}), {n, t, heads * dk});
}

void check_tokens(const Tensor& tokens, const MultiHeadAttentionParams& params) {
  if (tokens.ndim() != 3) {
    throw ShapeError("multi_head_attention: tokens must be [N, T, d], got " + shape_str(tokens.shape()));
  }
  const std::size_t d = tokens.dim(2);
  if (params.heads == 0 || d % params.heads != 0) {
    throw std::invalid_argument("multi_head_attention: " + std::to_string(params.heads) +
                                " heads do not divide dimension " + std::to_string(d));
  }
}

}  // namespace

Tensor multi_head_attention(const Tensor& tokens, const MultiHeadAttentionParams& params) {
  check_tokens(tokens, params);
  const std::size_t n = tokens.dim(0);
  const Tensor q = split_heads(linear(tokens, params.query), params.heads);
  const Tensor k = split_heads(linear(tokens, params.key), params.heads);
  const Tensor v = split_heads(linear(tokens, params.value), params.heads);
  return linear(merge_heads(attention(q, k, v), n, params.heads), params.output);
}

Tensor multi_head_attention_weights(const Tensor& tokens, const MultiHeadAttentionParams& params) {
  check_tokens(tokens, params);
  const std::size_t n = tokens.dim(0), t = tokens.dim(1);
  const Tensor q = split_heads(linear(tokens, params.query), params.heads);
  const Tensor k = split_heads(linear(tokens, params.key), params.heads);
  return reshape(attention_weights(q, k), {n, params.heads, t, t});
}

CTStream::CTStream(const CTConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const auto& c = config_;
  temporal_ = Conv2DParams::create(1, c.temporal_filters, 1, c.temporal_kernel, rng);
  spatial_ = Conv2DParams::create(c.temporal_filters, c.temporal_filters, c.features, 1, rng);
  norm_ = BatchNormParams::create(c.temporal_filters);
  projection_ = Conv2DParams::create(c.temporal_filters, c.embed_dim, 1, 1, rng);
  blocks_.reserve(c.attention_layers);
  for (std::size_t i = 0; i < c.attention_layers; ++i) {
    EncoderBlockParams b;
    b.attn_norm = LayerNormParams::create(c.embed_dim);
    b.attn = MultiHeadAttentionParams::create(c.embed_dim, c.heads, rng);
    b.ff_norm = LayerNormParams::create(c.embed_dim);
    b.ff_in = LinearParams::create(c.embed_dim, c.ff_hidden, rng);
    b.ff_out = LinearParams::create(c.ff_hidden, c.embed_dim, rng);
    blocks_.push_back(std::move(b));
  }
  head_hidden_ = LinearParams::create(c.token_count() * c.embed_dim, c.dense_hidden, rng);
  head_out_ = LinearParams::create(c.dense_hidden, c.num_classes, rng);
}

Tensor CTStream::convolution(const Tensor& input, const ForwardContext& ctx) {
  if (input.ndim() != 4 || input.dim(1) != 1) {
    throw ShapeError("ct stream expects [N, 1, F, W] input, got " + shape_str(input.shape()));
  }
  if (input.dim(2) != config_.features) {
    throw ShapeError("ct stream built for " + std::to_string(config_.features) +
                     " features, input has " + std::to_string(input.dim(2)));
  }
  Tensor x = conv2d(input, temporal_);
  x = conv2d(x, spatial_);
  x = batch_norm(x, norm_, ctx.training);
  x = elu(x);
  x = avg_pool2d(x, 1, config_.pool_kernel, {1, config_.pool_stride});
  x = dropout(x, config_.conv_dropout, ctx.training, ctx.rng);
  x = conv2d(x, projection_);
  const std::size_t n = x.dim(0), d = x.dim(1), tokens = x.dim(3);
  return permute(reshape(x, {n, d, tokens}), {0, 2, 1});
}

Tensor CTStream::encoder(const Tensor& tokens, const ForwardContext& ctx) const {
  Tensor x = tokens;
  for (const auto& b : blocks_) {
    Tensor h = multi_head_attention(layer_norm(x, b.attn_norm), b.attn);
    x = add(x, dropout(h, config_.dropout, ctx.training, ctx.rng));
    h = linear(layer_norm(x, b.ff_norm), b.ff_in);
    h = dropout(elu(h), config_.dropout, ctx.training, ctx.rng);
    h = linear(h, b.ff_out);
    x = add(x, dropout(h, config_.dropout, ctx.training, ctx.rng));
  }
  return x;
}

Tensor CTStream::forward(const Tensor& input, const ForwardContext& ctx, bool use_attention) {
  Tensor x = convolution(input, ctx);
  if (use_attention) x = encoder(x, ctx);
  const std::size_t n = x.dim(0);
  if (x.dim(1) * x.dim(2) != head_hidden_.weights.dim(0)) {
    throw ShapeError("ct head expects " + std::to_string(head_hidden_.weights.dim(0)) +
                     " flattened features, got " + shape_str(x.shape()));
  }
  x = reshape(x, {n, x.dim(1) * x.dim(2)});
  x = dropout(elu(linear(x, head_hidden_)), config_.dropout, ctx.training, ctx.rng);
  return linear(x, head_out_);
}

Tensor CTStream::infer(const Tensor& input, bool use_attention) const {
  // Eval mode reads running statistics only, so the cast cannot cause a write.
  return const_cast<CTStream*>(this)->forward(input, ForwardContext{}, use_attention);
}

void CTStream::collect_parameters(ParameterList& out, bool include_attention) const {
  temporal_.collect(out, "ct.temporal");
  spatial_.collect(out, "ct.spatial");
  norm_.collect(out, "ct.norm");
  projection_.collect(out, "ct.projection");
  if (include_attention) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "ct.block" + std::to_string(i);
      const auto& b = blocks_[i];
      b.attn_norm.collect(out, p + ".attn_norm");
      b.attn.collect(out, p + ".attn");
      b.ff_norm.collect(out, p + ".ff_norm");
      b.ff_in.collect(out, p + ".ff_in");
      b.ff_out.collect(out, p + ".ff_out");
    }
  }
  head_hidden_.collect(out, "ct.head_hidden");
  head_out_.collect(out, "ct.head_out");
}

void CTStream::collect_buffers(BufferList& out) { norm_.collect_buffers(out, "ct.norm"); }

}  // namespace tcct::model
