#include "tcct/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tcct {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

std::size_t resolve_axis(int axis, std::size_t ndim) {
  const int n = static_cast<int>(ndim);
  const int a = axis < 0 ? axis + n : axis;
  if (a < 0 || a >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(ndim));
  }
  return static_cast<std::size_t>(a);
}

// Sums in a fixed order; Eigen's vectorized reductions peel by buffer address,
// which makes the low bits depend on heap layout.
void add_row_sums(const double* m, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
    out[r] += s;
  }
}

void add_col_sums(const double* m, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += m[r * cols + c];
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t pad_total, std::size_t kernel,
                          std::size_t stride) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (in + pad_total < kernel) {
    throw ShapeError("window " + std::to_string(kernel) + " exceeds padded extent " +
                     std::to_string(in + pad_total));
  }
  return (in + pad_total - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require(is_suffix(b.shape(), a.shape()),
          "add: cannot broadcast " + shape_str(b.shape()) + " onto " + shape_str(a.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t inner = bv.size();
  std::vector<double> out(av.begin(), av.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % inner];
  return make_result(a.shape(), std::move(out), "add", {a, b}, [inner](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      double* g = pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      double* g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % inner] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      double* g = pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      double* g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      double* g = pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      double* g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_result(a.shape(), std::move(out), "scale", {a}, [factor](detail::Node& self) {
    double* g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor scale_by(const Tensor& a, const Tensor& factor) {
  require(factor.numel() == 1, "scale_by: factor must hold one value, got " +
                                   shape_str(factor.shape()));
  const double f = factor.values()[0];
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * f;
  return make_result(a.shape(), std::move(out), "scale_by", {a, factor}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pf = parent(self, 1);
    if (pa.requires_grad) {
      double* g = pa.ensure_grad();
      const double f = pf.value[0];
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * f;
    }
    if (pf.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa.value[i];
      pf.ensure_grad()[0] += acc;
    }
  });
}

Tensor log(const Tensor& a, double floor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(av[i], floor));
  return make_result(a.shape(), std::move(out), "log", {a}, [floor](detail::Node& self) {
    auto& pa = parent(self, 0);
    double* g = pa.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.value[i] > floor) g[i] += self.grad[i] / pa.value[i];
    }
  });
}

Tensor elu(const Tensor& a, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("elu: alpha must be positive");
  const auto av = a.values();
  std::vector<double> out(av.size());
  const Eigen::Map<const Eigen::ArrayXd> x(av.data(), static_cast<Eigen::Index>(av.size()));
  Eigen::Map<Eigen::ArrayXd>(out.data(), x.size()) =
      (x > 0.0).select(x, alpha * (x.min(0.0).exp() - 1.0));
  return make_result(a.shape(), std::move(out), "elu", {a}, [alpha](detail::Node& self) {
    auto& pa = parent(self, 0);
    double* g = pa.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      // For x <= 0 the derivative alpha*exp(x) equals y + alpha.
      const double d = pa.value[i] > 0.0 ? 1.0 : self.value[i] + alpha;
      g[i] += self.grad[i] * d;
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({1}, {acc}, "sum", {a}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    double* g = pa.ensure_grad();
    const double s = self.grad[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) g[i] += s;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_squares(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return make_result({1}, {acc}, "sum_squares", {a}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    double* g = pa.ensure_grad();
    const double s = 2.0 * self.grad[0];
    for (std::size_t i = 0; i < pa.value.size(); ++i) g[i] += s * pa.value[i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  const auto av = a.values();
  return make_result(std::move(shape), std::vector<double>(av.begin(), av.end()), "reshape", {a},
                     [](detail::Node& self) {
                       double* g = parent(self, 0).ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
                     });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& order) {
  const Shape& in = a.shape();
  const std::size_t rank = in.size();
  require(order.size() == rank, "permute: order rank mismatch for " + shape_str(in));
  std::vector<bool> seen(rank, false);
  for (auto o : order) {
    require(o < rank && !seen[o], "permute: invalid axis order for " + shape_str(in));
    seen[o] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in[order[i]];

  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t i = rank - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * in[i];
  // source offset step per output axis
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) step[i] = in_strides[order[i]];

  const std::size_t n = a.numel();
  std::vector<std::size_t> src_index(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t offset = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    src_index[flat] = offset;
    for (std::size_t ax = rank; ax-- > 0;) {
      ++counter[ax];
      offset += step[ax];
      if (counter[ax] < out_shape[ax]) break;
      offset -= step[ax] * counter[ax];
      counter[ax] = 0;
    }
  }
  const auto av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[src_index[i]];
  return make_result(std::move(out_shape), std::move(out), "permute", {a},
                     [src_index = std::move(src_index)](detail::Node& self) {
                       double* g = parent(self, 0).ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         g[src_index[i]] += self.grad[i];
                       }
                     });
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      ConstMapMat(a.values().data(), m, k) * ConstMapMat(b.values().data(), k, n);
  return make_result({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    ConstMapMat gy(self.grad.data(), m, n);
    if (pa.requires_grad) {
      MapMat(pa.ensure_grad(), m, k).noalias() += gy * ConstMapMat(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapMat(pb.ensure_grad(), k, n).noalias() += ConstMapMat(pa.value.data(), m, k).transpose() * gy;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(weight.ndim() == 2 && x.ndim() >= 1 && x.shape().back() == weight.dim(0),
          "linear: dimension mismatch " + shape_str(x.shape()) + " x " + shape_str(weight.shape()));
  require(bias.ndim() == 1 && bias.dim(0) == weight.dim(1),
          "linear: bias " + shape_str(bias.shape()) + " does not match weight " +
              shape_str(weight.shape()));
  const std::size_t d_in = weight.dim(0), d_out = weight.dim(1);
  const std::size_t rows = x.numel() / d_in;
  std::vector<double> out(rows * d_out);
  MapMat y(out.data(), rows, d_out);
  y.noalias() = ConstMapMat(x.values().data(), rows, d_in) *
                ConstMapMat(weight.values().data(), d_in, d_out);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), d_out);
  Shape shape = x.shape();
  shape.back() = d_out;
  return make_result(std::move(shape), std::move(out), "linear", {x, weight, bias},
                     [rows, d_in, d_out](detail::Node& self) {
                       auto& px = parent(self, 0);
                       auto& pw = parent(self, 1);
                       auto& pb = parent(self, 2);
                       ConstMapMat gy(self.grad.data(), rows, d_out);
                       if (px.requires_grad) {
                         MapMat(px.ensure_grad(), rows, d_in).noalias() +=
                             gy * ConstMapMat(pw.value.data(), d_in, d_out).transpose();
                       }
                       if (pw.requires_grad) {
                         MapMat(pw.ensure_grad(), d_in, d_out).noalias() +=
                             ConstMapMat(px.value.data(), rows, d_in).transpose() * gy;
                       }
                       if (pb.requires_grad) {
                         add_col_sums(self.grad.data(), rows, d_out, pb.ensure_grad());
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 3 && b.ndim() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1),
          "bmm: dimension mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(batch * m * n);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < batch; ++i) {
    MapMat(out.data() + i * m * n, m, n).noalias() =
        ConstMapMat(av + i * m * k, m, k) * ConstMapMat(bv + i * k * n, k, n);
  }
  return make_result({batch, m, n}, std::move(out), "bmm", {a, b},
                     [batch, m, k, n](detail::Node& self) {
                       auto& pa = parent(self, 0);
                       auto& pb = parent(self, 1);
                       double* ga = pa.requires_grad ? pa.ensure_grad() : nullptr;
                       double* gb = pb.requires_grad ? pb.ensure_grad() : nullptr;
                       for (std::size_t i = 0; i < batch; ++i) {
                         ConstMapMat gy(self.grad.data() + i * m * n, m, n);
                         if (ga) {
                           MapMat(ga + i * m * k, m, k).noalias() +=
                               gy * ConstMapMat(pb.value.data() + i * k * n, k, n).transpose();
                         }
                         if (gb) {
                           MapMat(gb + i * k * n, k, n).noalias() +=
                               ConstMapMat(pa.value.data() + i * m * k, m, k).transpose() * gy;
                         }
                       }
                     });
}

Tensor transpose_last2(const Tensor& a) {
  require(a.ndim() >= 2, "transpose_last2: rank < 2 for " + shape_str(a.shape()));
  std::vector<std::size_t> order(a.ndim());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::swap(order[order.size() - 1], order[order.size() - 2]);
  return permute(a, order);
}

// ---------------------------------------------------------------------------

namespace {

struct AxisLayout {
  std::size_t outer, len, inner;
};

AxisLayout layout_for(const Shape& shape, std::size_t axis) {
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  const auto ax = resolve_axis(axis, a.ndim());
  const auto l = layout_for(a.shape(), ax);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l.len; ++j) mx = std::max(mx, av[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.len; ++j) {
        const double e = std::exp(av[base + j * l.inner] - mx);
        out[base + j * l.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < l.len; ++j) out[base + j * l.inner] /= z;
    }
  }
  return make_result(a.shape(), std::move(out), "softmax", {a}, [l](detail::Node& self) {
    double* g = parent(self, 0).ensure_grad();
    const auto& y = self.value;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < l.len; ++j) {
          dot += gy[base + j * l.inner] * y[base + j * l.inner];
        }
        for (std::size_t j = 0; j < l.len; ++j) {
          const std::size_t idx = base + j * l.inner;
          g[idx] += y[idx] * (gy[idx] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, int axis) {
  const auto ax = resolve_axis(axis, a.ndim());
  const auto l = layout_for(a.shape(), ax);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < l.len; ++j) mx = std::max(mx, av[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.len; ++j) z += std::exp(av[base + j * l.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t j = 0; j < l.len; ++j) {
        out[base + j * l.inner] = av[base + j * l.inner] - lse;
      }
    }
  }
  return make_result(a.shape(), std::move(out), "log_softmax", {a}, [l](detail::Node& self) {
    double* g = parent(self, 0).ensure_grad();
    const auto& y = self.value;
    const auto& gy = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        double total = 0.0;
        for (std::size_t j = 0; j < l.len; ++j) total += gy[base + j * l.inner];
        for (std::size_t j = 0; j < l.len; ++j) {
          const std::size_t idx = base + j * l.inner;
          g[idx] += gy[idx] - std::exp(y[idx]) * total;
        }
      }
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require(logits.ndim() == 2, "cross_entropy: logits must be [N, C], got " +
                                  shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  require(labels.size() == n, "cross_entropy: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(n) + " rows");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(c) + ")");
    }
  }
  const auto z = logits.values();
  std::vector<double> probs(n * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    loss += lse - row[labels[i]];
  }
  loss /= static_cast<double>(n);
  std::vector<int> y(labels.begin(), labels.end());
  return make_result({1}, {loss}, "cross_entropy", {logits},
                     [n, c, probs = std::move(probs), y = std::move(y)](detail::Node& self) {
                       double* g = parent(self, 0).ensure_grad();
                       const double s = self.grad[0] / static_cast<double>(n);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t j = 0; j < c; ++j) {
                           const double target = static_cast<int>(j) == y[i] ? 1.0 : 0.0;
                           g[i * c + j] += s * (probs[i * c + j] - target);
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.shape().back();
  require(gamma.numel() == d && beta.numel() == d,
          "layer_norm: affine params " + shape_str(gamma.shape()) + " do not match " +
              shape_str(x.shape()));
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> out(xv.size()), xhat(xv.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
                     [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                         detail::Node& self) {
                       auto& px = parent(self, 0);
                       auto& pg = parent(self, 1);
                       auto& pb = parent(self, 2);
                       const auto& gy = self.grad;
                       if (pg.requires_grad || pb.requires_grad) {
                         double* gg = pg.requires_grad ? pg.ensure_grad() : nullptr;
                         double* gb = pb.requires_grad ? pb.ensure_grad() : nullptr;
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t j = 0; j < d; ++j) {
                             if (gg) gg[j] += gy[r * d + j] * xhat[r * d + j];
                             if (gb) gb[j] += gy[r * d + j];
                           }
                         }
                       }
                       if (px.requires_grad) {
                         double* gx = px.ensure_grad();
                         const double dn = static_cast<double>(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gh = gy[r * d + j] * pg.value[j];
                             s1 += gh;
                             s2 += gh * xhat[r * d + j];
                           }
                           for (std::size_t j = 0; j < d; ++j) {
                             const double gh = gy[r * d + j] * pg.value[j];
                             gx[r * d + j] +=
                                 inv_std[r] * (gh - s1 / dn - xhat[r * d + j] * s2 / dn);
                           }
                         }
                       }
                     });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormStats& stats, bool training) {
  require(x.ndim() == 4, "batch_norm: expected [N, C, H, W], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(gamma.numel() == c && beta.numel() == c,
          "batch_norm: affine params " + shape_str(gamma.shape()) + " do not match " +
              std::to_string(c) + " channels");
  if (stats.running_mean.size() != c || stats.running_var.size() != c) {
    throw ShapeError("batch_norm: running statistics sized for " +
                     std::to_string(stats.running_mean.size()) + " channels, input has " +
                     std::to_string(c));
  }
  if (!(stats.epsilon > 0.0)) throw std::invalid_argument("batch_norm: epsilon must be positive");
  const std::size_t count = n * hw;
  if (training && count < 2) {
    throw std::invalid_argument("batch_norm: training mode needs at least two values per channel");
  }
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> out(xv.size()), mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (training) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) ss += (p[j] - mu) * (p[j] - mu);
      }
      var = ss / static_cast<double>(count);
      const double m = stats.momentum;
      stats.running_mean[ch] = (1.0 - m) * stats.running_mean[ch] + m * mu;
      stats.running_var[ch] = (1.0 - m) * stats.running_var[ch] +
                              m * ss / static_cast<double>(count - 1);
    } else {
      mu = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    mean[ch] = mu;
    inv_std[ch] = 1.0 / std::sqrt(var + stats.epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        out[off + j] = gv[ch] * (xv[off + j] - mu) * inv_std[ch] + bv[ch];
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
      [n, c, hw, training, mean = std::move(mean), inv_std = std::move(inv_std)](
          detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pg = parent(self, 1);
        auto& pb = parent(self, 2);
        const auto& gy = self.grad;
        const auto& xv = px.value;
        const double count = static_cast<double>(n * hw);
        for (std::size_t ch = 0; ch < c; ++ch) {
          // normalized input, recomputed rather than stored
          const double mu = mean[ch], is = inv_std[ch];
          auto xhat = [&](std::size_t k) { return (xv[k] - mu) * is; };
          double sum_g = 0.0, sum_gh = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
              sum_g += gy[off + j];
              sum_gh += gy[off + j] * xhat(off + j);
            }
          }
          if (pg.requires_grad) pg.ensure_grad()[ch] += sum_gh;
          if (pb.requires_grad) pb.ensure_grad()[ch] += sum_g;
          if (!px.requires_grad) continue;
          double* gx = px.ensure_grad();
          const double k = pg.value[ch] * inv_std[ch];
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
              if (training) {
                gx[off + j] += k * (gy[off + j] - sum_g / count - xhat(off + j) * sum_gh / count);
              } else {
                gx[off + j] += k * gy[off + j];
              }
            }
          }
        }
      });
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode requires an rng");
  const auto av = a.values();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> mask(av.size());
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    mask[i] = unif(*rng) < rate ? 0.0 : keep_scale;
    out[i] = av[i] * mask[i];
  }
  return make_result(a.shape(), std::move(out), "dropout", {a},
                     [mask = std::move(mask)](detail::Node& self) {
                       double* g = parent(self, 0).ensure_grad();
                       for (std::size_t i = 0; i < self.grad.size(); ++i) {
                         g[i] += self.grad[i] * mask[i];
                       }
                     });
}

// ---------------------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t c, h, w;    // input per sample
  std::size_t kh, kw;
  std::size_t oh, ow;
  Stride2D stride;
  Padding2D pad;
  std::size_t rows() const { return c * kh * kw; }
  std::size_t cols() const { return oh * ow; }
};

void im2col(const double* x, const ConvGeometry& g, double* cols) {
  const std::size_t pcount = g.cols();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* dst = cols + ((ch * g.kh + ki) * g.kw + kj) * pcount;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const long ii = static_cast<long>(oi * g.stride.h + ki) - static_cast<long>(g.pad.top);
          double* drow = dst + oi * g.ow;
          if (ii < 0 || ii >= static_cast<long>(g.h)) {
            std::fill(drow, drow + g.ow, 0.0);
            continue;
          }
          const double* src = x + (ch * g.h + static_cast<std::size_t>(ii)) * g.w;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const long jj =
                static_cast<long>(oj * g.stride.w + kj) - static_cast<long>(g.pad.left);
            drow[oj] = (jj < 0 || jj >= static_cast<long>(g.w)) ? 0.0 : src[jj];
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* gx) {
  const std::size_t pcount = g.cols();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* srcp = cols + ((ch * g.kh + ki) * g.kw + kj) * pcount;
        for (std::size_t oi = 0; oi < g.oh; ++oi) {
          const long ii = static_cast<long>(oi * g.stride.h + ki) - static_cast<long>(g.pad.top);
          if (ii < 0 || ii >= static_cast<long>(g.h)) continue;
          double* dst = gx + (ch * g.h + static_cast<std::size_t>(ii)) * g.w;
          const double* srow = srcp + oi * g.ow;
          for (std::size_t oj = 0; oj < g.ow; ++oj) {
            const long jj =
                static_cast<long>(oj * g.stride.w + kj) - static_cast<long>(g.pad.left);
            if (jj >= 0 && jj < static_cast<long>(g.w)) dst[jj] += srow[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, Stride2D stride,
              Padding2D padding) {
  require(x.ndim() == 4, "conv2d: input must be [N, C, H, W], got " + shape_str(x.shape()));
  require(weight.ndim() == 4 && weight.dim(1) == x.dim(1),
          "conv2d: dimension mismatch between input " + shape_str(x.shape()) + " and weights " +
              shape_str(weight.shape()));
  require(bias.numel() == weight.dim(0), "conv2d: bias " + shape_str(bias.shape()) +
                                             " does not match weights " +
                                             shape_str(weight.shape()));
  if (stride.h == 0 || stride.w == 0) throw ShapeError("conv2d: stride components must be >= 1");
  ConvGeometry g;
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (g.h + padding.top + padding.bottom < g.kh || g.w + padding.left + padding.right < g.kw) {
    throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                     shape_str(x.shape()));
  }
  g.oh = conv_out_size(g.h, padding.top + padding.bottom, g.kh, stride.h);
  g.ow = conv_out_size(g.w, padding.left + padding.right, g.kw, stride.w);
  const std::size_t n = x.dim(0), c_out = weight.dim(0);
  const std::size_t in_size = g.c * g.h * g.w, out_size = c_out * g.cols();

  std::vector<double> out(n * out_size);
  std::vector<double> cols(g.rows() * g.cols());
  ConstMapMat w(weight.values().data(), c_out, g.rows());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.values().data() + i * in_size, g, cols.data());
    MapMat y(out.data() + i * out_size, c_out, g.cols());
    y.noalias() = w * ConstMapMat(cols.data(), g.rows(), g.cols());
    for (std::size_t o = 0; o < c_out; ++o) y.row(o).array() += bv[o];
  }
  return make_result(
      {n, c_out, g.oh, g.ow}, std::move(out), "conv2d", {x, weight, bias},
      [g, n, c_out, in_size, out_size](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pw = parent(self, 1);
        auto& pb = parent(self, 2);
        std::vector<double> cols(g.rows() * g.cols());
        ConstMapMat w(pw.value.data(), c_out, g.rows());
        for (std::size_t i = 0; i < n; ++i) {
          ConstMapMat gy(self.grad.data() + i * out_size, c_out, g.cols());
          if (pb.requires_grad) {
            add_row_sums(self.grad.data() + i * out_size, c_out, g.cols(), pb.ensure_grad());
          }
          if (pw.requires_grad) {
            im2col(px.value.data() + i * in_size, g, cols.data());
            MapMat(pw.ensure_grad(), c_out, g.rows()).noalias() +=
                gy * ConstMapMat(cols.data(), g.rows(), g.cols()).transpose();
          }
          if (px.requires_grad) {
            MapMat(cols.data(), g.rows(), g.cols()).noalias() = w.transpose() * gy;
            col2im_add(cols.data(), g, px.ensure_grad() + i * in_size);
          }
        }
      });
}

Tensor avg_pool2d(const Tensor& x, std::size_t kernel_h, std::size_t kernel_w, Stride2D stride) {
  require(x.ndim() == 4, "avg_pool2d: input must be [N, C, H, W], got " + shape_str(x.shape()));
  if (kernel_h == 0 || kernel_w == 0) throw ShapeError("avg_pool2d: kernel must be positive");
  if (kernel_h > x.dim(2) || kernel_w > x.dim(3)) {
    throw ShapeError("avg_pool2d: window " + std::to_string(kernel_h) + "x" +
                     std::to_string(kernel_w) + " larger than input " + shape_str(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = conv_out_size(h, 0, kernel_h, stride.h);
  const std::size_t ow = conv_out_size(w, 0, kernel_w, stride.w);
  const double inv = 1.0 / static_cast<double>(kernel_h * kernel_w);
  const auto xv = x.values();
  std::vector<double> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < kernel_h; ++a) {
          const double* row = src + (i * stride.h + a) * w + j * stride.w;
          for (std::size_t b = 0; b < kernel_w; ++b) s += row[b];
        }
        out[(p * oh + i) * ow + j] = s * inv;
      }
    }
  }
  return make_result({x.dim(0), x.dim(1), oh, ow}, std::move(out), "avg_pool2d", {x},
                     [=](detail::Node& self) {
                       double* g = parent(self, 0).ensure_grad();
                       for (std::size_t p = 0; p < planes; ++p) {
                         double* dst = g + p * h * w;
                         for (std::size_t i = 0; i < oh; ++i) {
                           for (std::size_t j = 0; j < ow; ++j) {
                             const double v = self.grad[(p * oh + i) * ow + j] * inv;
                             for (std::size_t a = 0; a < kernel_h; ++a) {
                               double* row = dst + (i * stride.h + a) * w + j * stride.w;
                               for (std::size_t b = 0; b < kernel_w; ++b) row[b] += v;
                             }
                           }
                         }
                       }
                     });
}

Tensor global_avg_pool2d(const Tensor& x) {
  require(x.ndim() == 4, "global_avg_pool2d: input must be [N, C, H, W], got " +
                             shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const auto xv = x.values();
  std::vector<double> out(n * c);
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += xv[p * hw + j];
    out[p] = s / static_cast<double>(hw);
  }
  return make_result({n, c}, std::move(out), "global_avg_pool2d", {x}, [n, c, hw](detail::Node& self) {
    double* g = parent(self, 0).ensure_grad();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t p = 0; p < n * c; ++p) {
      const double v = self.grad[p] * inv;
      for (std::size_t j = 0; j < hw; ++j) g[p * hw + j] += v;
    }
  });
}

}  // namespace tcct
