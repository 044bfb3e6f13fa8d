#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "tcct/tensor.hpp"

namespace tcct {

using Rng = std::mt19937_64;

struct Stride2D {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Zero padding per side. Even time kernels need an uneven left/right split,
// so the four sides are independent.
struct Padding2D {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding2D symmetric(std::size_t h, std::size_t w) { return {h, h, w, w}; }
};

// ---- element-wise and structural ----

// b must match a exactly or match a's trailing dimensions (broadcast over
// the leading ones).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Multiplies every element by a one-element tensor; gradients reach both.
Tensor scale_by(const Tensor& a, const Tensor& factor);
Tensor log(const Tensor& a, double floor = 1e-300);
Tensor elu(const Tensor& a, double alpha = 1.0);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_squares(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& order);

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b);
// x[..., D] * weight[D, D'] + bias[D'], rows taken over all leading dims.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Batched a[B, M, K] * b[B, K, N].
Tensor bmm(const Tensor& a, const Tensor& b);
Tensor transpose_last2(const Tensor& a);

// ---- normalization and probability ----

Tensor softmax(const Tensor& a, int axis = -1);
Tensor log_softmax(const Tensor& a, int axis = -1);
// Mean negative log-likelihood of logits[N, C] under integer labels,
// computed through log-sum-exp.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
};

// x[N, C, H, W]. Training mode normalizes with batch statistics and updates
// the running estimates; eval mode uses the running estimates.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training);

// Inverted dropout. Eval mode and rate 0 return the input unchanged.
Tensor dropout(const Tensor& a, double rate, bool training, Rng* rng);

// ---- convolution and pooling ----

// Cross-correlation. x[N, C, H, W], weight[C', C, kh, kw], bias[C'].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Stride2D stride = {},
              Padding2D padding = {});
Tensor avg_pool2d(const Tensor& x, std::size_t kernel_h, std::size_t kernel_w, Stride2D stride);
// Mean over H and W: [N, C, H, W] -> [N, C].
Tensor global_avg_pool2d(const Tensor& x);

std::size_t conv_out_size(std::size_t in, std::size_t pad_total, std::size_t kernel,
                          std::size_t stride);

}  // namespace tcct
