#pragma once

#include <cstddef>
#include <vector>

#include "tcct/layers.hpp"

namespace tcct::model {

// Temporal-spatial stream hyperparameters. Defaults follow the reference
// architecture for 280-step inputs.
struct CTConfig {
  std::size_t features = 2;
  std::size_t signal_length = 280;
  std::size_t temporal_filters = 40;
  std::size_t temporal_kernel = 25;
  std::size_t pool_kernel = 75;
  std::size_t pool_stride = 15;
  std::size_t embed_dim = 40;
  std::size_t heads = 10;
  std::size_t attention_layers = 6;
  std::size_t ff_hidden = 160;
  std::size_t dense_hidden = 256;
  double conv_dropout = 0.5;
  double dropout = 0.3;
  std::size_t num_classes = 4;

  void validate() const;
  std::size_t head_dim() const { return embed_dim / heads; }
  std::size_t conv_width() const;   // width after the temporal convolution
  std::size_t token_count() const;  // width after pooling
};

// Softmax(Q K^T / sqrt(d_k)) V over [B, T, d_k] operands.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);
// Row-stochastic weights Softmax(Q K^T / sqrt(d_k)), [B, T, T].
Tensor attention_weights(const Tensor& q, const Tensor& k);

// Full-width query/key/value projections whose column blocks are the
// per-head maps, plus the output projection.
struct MultiHeadAttentionParams {
  std::size_t heads = 1;
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams output;

  static MultiHeadAttentionParams create(std::size_t dim, std::size_t heads, Rng& rng);
  void collect(ParameterList& out, const std::string& prefix) const;
};

// tokens[N, T, d] -> [N, T, d]; heads are concatenated in index order before
// the output projection.
Tensor multi_head_attention(const Tensor& tokens, const MultiHeadAttentionParams& params);
// Per-head attention weights [N, h, T, T] for inspection.
Tensor multi_head_attention_weights(const Tensor& tokens, const MultiHeadAttentionParams& params);

struct EncoderBlockParams {
  LayerNormParams attn_norm;
  MultiHeadAttentionParams attn;
  LayerNormParams ff_norm;
  LinearParams ff_in;
  LinearParams ff_out;
};

class CTStream {
 public:
  CTStream(const CTConfig& config, Rng& rng);

  const CTConfig& config() const { return config_; }

  // input[N, 1, F, W] -> tokens[N, tokens, embed_dim]
  Tensor convolution(const Tensor& input, const ForwardContext& ctx);
  // input[N, 1, F, W] -> raw class scores [N, num_classes]
  Tensor forward(const Tensor& input, const ForwardContext& ctx, bool use_attention = true);
  // Eval-mode forward; never touches running statistics.
  Tensor infer(const Tensor& input, bool use_attention = true) const;

  void collect_parameters(ParameterList& out, bool include_attention = true) const;
  void collect_buffers(BufferList& out);

  const std::vector<EncoderBlockParams>& blocks() const { return blocks_; }

 private:
  Tensor encoder(const Tensor& tokens, const ForwardContext& ctx) const;

  CTConfig config_;
  Conv2DParams temporal_;
  Conv2DParams spatial_;
  BatchNormParams norm_;
  Conv2DParams projection_;
  std::vector<EncoderBlockParams> blocks_;
  LinearParams head_hidden_;
  LinearParams head_out_;
};

}  // namespace tcct::model
