#include <doctest.h>

#include <cmath>

#include "support/grad_suite.hpp"
#include "tcct/layers.hpp"
#include "tcct/ops.hpp"

using namespace tcct;
using tcct::testing::project;
using tcct::testing::random_tensor;

namespace {

// Six nested loops, zero padding, no tricks.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, Stride2D s,
                                Padding2D p) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + p.top + p.bottom - kh) / s.h + 1;
  const std::size_t ow = (wd + p.left + p.right - kw) / s.w + 1;
  std::vector<double> out(n * co * oh * ow);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t z = 0; z < ow; ++z) {
          double acc = b[o];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t q = 0; q < kw; ++q) {
                const long yy = static_cast<long>(y * s.h + a) - static_cast<long>(p.top);
                const long zz = static_cast<long>(z * s.w + q) - static_cast<long>(p.left);
                if (yy < 0 || zz < 0 || yy >= static_cast<long>(h) || zz >= static_cast<long>(wd)) continue;
                acc += x[((i * c + ci) * h + yy) * wd + zz] * w[((o * c + ci) * kh + a) * kw + q];
              }
          out[((i * co + o) * oh + y) * ow + z] = acc;
        }
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("ops") {

TEST_CASE("conv2d output width for a 1x25 kernel on 280 samples") {
  Rng rng(1);
  auto x = random_tensor({1, 1, 1, 280}, rng);
  auto w = random_tensor({1, 1, 1, 25}, rng);
  auto b = random_tensor({1}, rng);
  CHECK(conv2d(x, w, b).shape() == Shape{1, 1, 1, 256});
}

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tensor x({1, 1, 2, 2}, {1, 1, 1, 1});
  Tensor w({1, 1, 1, 1}, std::vector<double>{1.0});
  Tensor b({1}, std::vector<double>{0.0});
  const auto y = conv2d(x, w, b);
  CHECK(y.shape() == x.shape());
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == 1.0);
}

TEST_CASE("conv2d matches the loop oracle") {
  Rng rng(2);
  auto x = random_tensor({1, 2, 4, 9}, rng);
  auto w = random_tensor({3, 2, 2, 3}, rng);
  auto b = random_tensor({3}, rng);
  CHECK(max_abs_diff(conv2d(x, w, b).values(), conv_oracle(x, w, b, {}, {})) < 1e-12);

  SUBCASE("with stride and asymmetric padding") {
    const Stride2D s{2, 3};
    const Padding2D p{1, 0, 2, 1};
    auto x2 = random_tensor({2, 2, 5, 11}, rng);
    CHECK(max_abs_diff(conv2d(x2, w, b, s, p).values(), conv_oracle(x2, w, b, s, p)) < 1e-12);
  }
}

TEST_CASE("conv2d rejects mismatched channels naming both shapes") {
  Rng rng(3);
  auto x = random_tensor({1, 3, 4, 9}, rng);
  auto w = random_tensor({2, 2, 1, 3}, rng);
  auto b = random_tensor({2}, rng);
  try {
    conv2d(x, w, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1x3x4x9]") != std::string::npos);
    CHECK(msg.find("[2x2x1x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d(random_tensor({1, 2, 1, 2}, rng), w, b), ShapeError);
}

TEST_CASE("avg_pool2d") {
  Rng rng(4);
  CHECK(avg_pool2d(random_tensor({1, 1, 1, 256}, rng), 1, 75, {1, 15}).shape() == Shape{1, 1, 1, 13});

  const auto c = avg_pool2d(Tensor::full({2, 3, 1, 40}, 2.5), 1, 4, {1, 3});
  for (double v : c.values()) CHECK(v == 2.5);

  auto x = random_tensor({1, 1, 1, 10}, rng);
  const auto y = avg_pool2d(x, 1, 2, {1, 2});
  REQUIRE(y.numel() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(y[i] == (x[2 * i] + x[2 * i + 1]) / 2.0);

  CHECK_THROWS_AS(avg_pool2d(x, 1, 11, {1, 1}), ShapeError);
}

TEST_CASE("batch_norm normalizes in training and uses running stats in eval") {
  Rng rng(5);
  auto x = random_tensor({4, 3, 2, 5}, rng, false, -3.0, 5.0);
  auto bn = BatchNormParams::create(3);
  const auto y = batch_norm(x, bn, true);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        const double v = y[(i * 3 + ch) * 10 + j];
        s += v;
        ss += v * v;
      }
    CHECK(std::abs(s / 40.0) < 1e-12);
    CHECK(ss / 40.0 == doctest::Approx(1.0).epsilon(1e-3));
  }
  for (double v : bn.stats.running_var) CHECK(v >= 0.0);

  auto fresh = BatchNormParams::create(3);
  const auto e = batch_norm(x, fresh, false);
  // Running mean 0, variance 1: eval output is x / sqrt(1 + eps).
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(e[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-14));
  }
  CHECK_THROWS(batch_norm(random_tensor({1, 3, 1, 1}, rng), fresh, true));
}

TEST_CASE("elu values") {
  const auto y = elu(Tensor({4}, {-2.0, -0.5, 0.0, 1.5}));
  CHECK(y[0] == doctest::Approx(std::expm1(-2.0)).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(std::expm1(-0.5)).epsilon(1e-15));
  CHECK(y[2] == 0.0);
  CHECK(y[3] == 1.5);
}

TEST_CASE("linear matches a direct matrix product") {
  Rng rng(6);
  auto x = random_tensor({3, 4}, rng);
  auto w = random_tensor({4, 2}, rng);
  auto b = random_tensor({2}, rng);
  const auto y = linear(x, w, b);
  REQUIRE(y.shape() == Shape{3, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = b[j];
      for (std::size_t k = 0; k < 4; ++k) acc += x[i * 4 + k] * w[k * 2 + j];
      CHECK(std::abs(y[i * 2 + j] - acc) < 1e-14);
    }
  CHECK_THROWS_AS(linear(x, random_tensor({3, 2}, rng), b), ShapeError);
}

TEST_CASE("softmax rows are distributions and shift invariant") {
  Rng rng(7);
  auto x = random_tensor({5, 4}, rng, false, -20.0, 20.0);
  const auto p = softmax(x, -1);
  const auto q = softmax(add(x, Tensor::full({5, 4}, 300.0)), -1);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(p[i * 4 + j] >= 0.0);
      CHECK(std::abs(p[i * 4 + j] - q[i * 4 + j]) < 1e-12);
      s += p[i * 4 + j];
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("dropout") {
  Rng rng(8);
  auto x = random_tensor({1000}, rng);
  const auto eval = dropout(x, 0.5, false, &rng);
  const auto zero = dropout(x, 0.0, true, &rng);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(eval[i] == x[i]);
    CHECK(zero[i] == x[i]);
  }
  const auto ones = dropout(Tensor::full({20000}, 1.0), 0.3, true, &rng);
  double mean = 0.0;
  for (double v : ones.values()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-12));
    mean += v;
  }
  CHECK(mean / 20000.0 == doctest::Approx(1.0).epsilon(0.03));
  CHECK_THROWS(dropout(x, 1.0, true, &rng));
}

TEST_CASE("backward requires a scalar and accumulates into shared leaves") {
  Tensor a({3}, {1.0, 2.0, 3.0}, true);
  CHECK_THROWS_AS(mul(a, a).backward(), ShapeError);
  sum(add(mul(a, a), a)).backward();
  const auto g = a.grad_or_zero();
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(2.0 * a[i] + 1.0));
}

TEST_CASE("finite-difference gradients of every primitive") {
  for (const auto& c : tcct::testing::primitive_grad_cases()) {
    CAPTURE(c.name);
    const auto r = tcct::testing::run_case(c);
    CAPTURE(r.worst);
    CHECK(r.checked > 0);
    CHECK(r.ok());
  }
}

TEST_CASE("gradients are bitwise independent of heap layout") {
  // The same graph built after differently sized allocations must give the
  // same bits, so training runs reproduce exactly.
  auto grads = [](std::size_t skew) {
    std::vector<std::vector<double>> pad;
    for (std::size_t i = 0; i < skew; ++i) pad.emplace_back(i % 7 + 1);
    Rng rng(21);
    auto x = random_tensor({3, 2, 5, 37}, rng);
    auto w = random_tensor({4, 2, 2, 5}, rng), b = random_tensor({4}, rng);
    auto lw = random_tensor({33, 5}, rng), lb = random_tensor({5}, rng);
    auto y = conv2d(x, w, b, {1, 1}, {0, 0, 2, 2});
    auto z = linear(reshape(y, {48, 37}), random_tensor({37, 33}, rng, false), Tensor({33}, false));
    project(linear(z, lw, lb)).backward();
    return std::vector<std::vector<double>>{x.grad_or_zero(), w.grad_or_zero(), b.grad_or_zero(),
                                            lw.grad_or_zero(), lb.grad_or_zero()};
  };
  const auto base = grads(0);
  for (std::size_t skew : {1u, 3u, 5u, 11u}) {
    CAPTURE(skew);
    const auto other = grads(skew);
    for (std::size_t k = 0; k < base.size(); ++k) CHECK(other[k] == base[k]);
  }
}

}  // TEST_SUITE
