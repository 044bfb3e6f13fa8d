#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "tcct/stream_ct.hpp"
#include "tcct/stream_tc.hpp"

namespace tcct::testing {

struct GradCase {
  std::string name;
  std::function<Tensor()> loss;
  std::vector<NamedTensor> inputs;
  std::size_t max_entries = 0;  // 0 checks every entry
};

// One case per differentiable primitive, on small random shapes. Tensors are
// captured by handle, so the cases own their inputs.
inline std::vector<GradCase> primitive_grad_cases(std::uint64_t seed = 9) {
  Rng rng(seed);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({2, 3, 4}, rng);
  auto v = random_tensor({4}, rng);
  auto pos = random_tensor({2, 3, 4}, rng, true, 0.5, 2.0);
  auto s = Tensor::scalar(0.7, true);
  auto m1 = random_tensor({3, 5}, rng), m2 = random_tensor({5, 2}, rng);
  auto b1 = random_tensor({2, 3, 5}, rng), b2 = random_tensor({2, 5, 4}, rng);
  auto lw = random_tensor({4, 3}, rng), lb = random_tensor({3}, rng);
  auto gamma = random_tensor({4}, rng), beta = random_tensor({4}, rng);
  auto cx = random_tensor({2, 2, 3, 7}, rng), cw = random_tensor({3, 2, 2, 3}, rng),
       cb = random_tensor({3}, rng);
  auto bx = random_tensor({3, 2, 2, 3}, rng), bg = random_tensor({2}, rng, true, 0.5, 1.5),
       bb = random_tensor({2}, rng);
  auto logits = random_tensor({5, 4}, rng, true, -3.0, 3.0);
  const std::vector<int> labels{0, 3, 1, 2, 3};

  return {
      {"add", [=] { return project(add(a, b)); }, {{"a", a}, {"b", b}}},
      {"add broadcast", [=] { return project(add(a, v)); }, {{"a", a}, {"v", v}}},
      {"sub", [=] { return project(sub(a, b)); }, {{"a", a}, {"b", b}}},
      {"mul", [=] { return project(mul(a, b)); }, {{"a", a}, {"b", b}}},
      {"scale", [=] { return project(scale(a, -1.3)); }, {{"a", a}}},
      {"scale_by", [=] { return project(scale_by(a, s)); }, {{"a", a}, {"s", s}}},
      {"log", [=] { return project(log(pos)); }, {{"pos", pos}}},
      {"elu", [=] { return project(elu(a)); }, {{"a", a}}},
      {"mean", [=] { return scale(mean(mul(a, a)), 3.0); }, {{"a", a}}},
      {"sum_squares", [=] { return sum_squares(a); }, {{"a", a}}},
      {"reshape", [=] { return project(reshape(a, {6, 4})); }, {{"a", a}}},
      {"permute", [=] { return project(permute(a, {2, 0, 1})); }, {{"a", a}}},
      {"matmul", [=] { return project(matmul(m1, m2)); }, {{"m1", m1}, {"m2", m2}}},
      {"bmm", [=] { return project(bmm(b1, b2)); }, {{"b1", b1}, {"b2", b2}}},
      {"transpose_last2", [=] { return project(transpose_last2(b1)); }, {{"b1", b1}}},
      {"linear", [=] { return project(linear(a, lw, lb)); }, {{"a", a}, {"w", lw}, {"b", lb}}},
      {"softmax", [=] { return project(softmax(a, 1)); }, {{"a", a}}},
      {"log_softmax", [=] { return project(log_softmax(a, -1)); }, {{"a", a}}},
      {"cross_entropy", [=] { return cross_entropy(logits, labels); }, {{"logits", logits}}},
      {"layer_norm", [=] { return project(layer_norm(a, gamma, beta)); },
       {{"a", a}, {"gamma", gamma}, {"beta", beta}}},
      {"batch_norm",
       [=] {
         BatchNormStats stats{{0.0, 0.0}, {1.0, 1.0}};
         return project(batch_norm(bx, bg, bb, stats, true));
       },
       {{"x", bx}, {"gamma", bg}, {"beta", bb}}},
      {"dropout",
       [=] {
         Rng fixed(17);
         return project(dropout(a, 0.4, true, &fixed));
       },
       {{"a", a}}},
      {"conv2d", [=] { return project(conv2d(cx, cw, cb, {1, 2}, {1, 0, 2, 1})); },
       {{"x", cx}, {"w", cw}, {"b", cb}}},
      {"avg_pool2d", [=] { return project(avg_pool2d(cx, 2, 3, {1, 2})); }, {{"x", cx}}},
      {"global_avg_pool2d", [=] { return project(global_avg_pool2d(cx)); }, {{"x", cx}}},
  };
}

inline model::CTConfig micro_ct_config() {
  model::CTConfig c;
  c.features = 2;
  c.signal_length = 40;
  c.temporal_filters = 4;
  c.temporal_kernel = 5;
  c.pool_kernel = 6;
  c.pool_stride = 10;
  c.embed_dim = 4;
  c.heads = 2;
  c.attention_layers = 1;
  c.ff_hidden = 8;
  c.dense_hidden = 6;
  return c;
}

inline model::TCConfig micro_tc_config() {
  model::TCConfig c;
  c.features = 2;
  c.scales = 4;
  c.signal_length = 40;
  c.conv1_channels = 3;
  c.conv1_kernel = 10;
  c.pool_kernel = 15;
  c.pool_stride = 15;
  c.conv2_channels = 4;
  c.conv2_kernel = 2;
  c.dense_hidden = 5;
  return c;
}

// Training-mode forward of a whole stream with a fixed dropout mask, against
// every parameter (sampled at reference width).
inline GradCase ct_stream_case(const std::string& name, const model::CTConfig& config,
                               std::size_t max_entries, std::uint64_t seed) {
  Rng rng(seed);
  auto ct = std::make_shared<model::CTStream>(config, rng);
  auto x = random_tensor({2, 1, config.features, config.signal_length}, rng, false);
  ParameterList params;
  ct->collect_parameters(params);
  return {name,
          [ct, x, seed] {
            Rng drop(seed + 1);
            return project(ct->forward(x, ForwardContext{true, &drop}));
          },
          params, max_entries};
}

inline GradCase tc_stream_case(const std::string& name, const model::TCConfig& config,
                               std::size_t max_entries, std::uint64_t seed) {
  Rng rng(seed);
  auto tc = std::make_shared<model::TCStream>(config, rng);
  auto x = random_tensor({2, config.features, config.scales, config.signal_length}, rng, false, 0.0, 2.0);
  ParameterList params;
  tc->collect_parameters(params);
  return {name,
          [tc, x, seed] {
            Rng drop(seed + 1);
            return project(tc->forward(x, ForwardContext{true, &drop}));
          },
          params, max_entries};
}

inline std::vector<GradCase> stream_grad_cases() {
  // Reference widths with an input just long enough for two tokens.
  model::CTConfig ct_ref;
  ct_ref.signal_length = 114;
  ct_ref.attention_layers = 2;
  model::TCConfig tc_ref;
  tc_ref.signal_length = 60;
  return {
      ct_stream_case("ct stream (micro)", micro_ct_config(), 0, 10),
      ct_stream_case("ct stream (reference width)", ct_ref, 4, 11),
      tc_stream_case("tc stream (micro)", micro_tc_config(), 0, 13),
      tc_stream_case("tc stream (reference width)", tc_ref, 4, 14),
  };
}

inline GradCheckResult run_case(const GradCase& c) {
  return check_gradients(c.loss, c.inputs, c.max_entries);
}

}  // namespace tcct::testing
