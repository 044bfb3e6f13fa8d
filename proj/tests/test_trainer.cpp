#include <doctest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "tcct/errors.hpp"
#include "tcct/synthetic.hpp"
#include "tcct/trainer.hpp"

using namespace tcct;
using namespace tcct::train;
using tcct::testing::random_tensor;

namespace {

// Sets p.grad = g by differentiating sum(p * g).
void set_grad(Tensor p, const std::vector<double>& g) {
  p.zero_grad();
  sum(mul(p, Tensor(p.shape(), g, false))).backward();
}

data::Dataset small_set(std::size_t per_class, data::Split split, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.samples_per_class = per_class;
  spec.split = split;
  spec.seed = seed;
  return data::make_synthetic(spec);
}

model::ModelConfig small_model() {
  model::ModelConfig mc;
  mc.set_input(2, 280);
  mc.ct.attention_layers = 1;
  return mc;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("adam leaves parameters alone under zero gradients") {
  Rng rng(1);
  auto p = random_tensor({6}, rng);
  const std::vector<double> before(p.values().begin(), p.values().end());
  Adam adam({p}, 0.6, 0.999, 1e-8);
  for (int i = 0; i < 3; ++i) {
    set_grad(p, std::vector<double>(6, 0.0));
    adam.step(0.01);
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(p[i] == before[i]);
}

TEST_CASE("adam first step moves each entry by the learning rate") {
  Rng rng(2);
  auto p = random_tensor({5}, rng);
  const std::vector<double> before(p.values().begin(), p.values().end());
  const std::vector<double> g{0.3, -2.0, 1e-2, 5.0, -0.7};
  Adam adam({p}, 0.6, 0.999, 1e-8);
  set_grad(p, g);
  adam.step(5e-4);
  for (std::size_t i = 0; i < 5; ++i) {
    const double moved = before[i] - p[i];
    CHECK(std::abs(std::abs(moved) - 5e-4) < 1e-6 * 5e-4 + 1e-12);
    CHECK((moved > 0) == (g[i] > 0));
  }
}

TEST_CASE("adam matches a scalar reference over several steps") {
  Rng rng(3);
  auto p = random_tensor({4}, rng);
  std::vector<double> ref(p.values().begin(), p.values().end());
  std::vector<double> m(4, 0.0), v(4, 0.0);
  const double b1 = 0.6, b2 = 0.999, eps = 1e-8, lr = 1e-3;
  Adam adam({p}, b1, b2, eps);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 1; t <= 5; ++t) {
    std::vector<double> g(4);
    for (auto& x : g) x = u(rng);
    set_grad(p, g);
    adam.step(lr);
    for (std::size_t i = 0; i < 4; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
  CHECK(adam.steps() == 5);
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("adam refuses a parameter without a gradient") {
  Rng rng(4);
  auto p = random_tensor({3}, rng);
  Adam adam({p}, 0.6, 0.999, 1e-8);
  CHECK_THROWS_AS(adam.step(1e-3), std::invalid_argument);
}

TEST_CASE("early stopping halts after the patience window") {
  EarlyStopping es(3);
  const std::vector<double> acc{0.5, 0.6, 0.7, 0.8, 0.9, 0.9, 0.85, 0.9, 0.95};
  std::size_t stopped = 0;
  for (std::size_t e = 1; e <= acc.size(); ++e) {
    es.update(e, acc[e - 1]);
    if (es.should_stop()) {
      stopped = e;
      break;
    }
  }
  CHECK(stopped == 8);
  CHECK(es.best_epoch() == 5);
  CHECK(es.best_metric() == 0.9);
}

TEST_CASE("early stopping counts equal scores as no improvement") {
  EarlyStopping es(2);
  CHECK(es.update(1, 0.0));
  CHECK_FALSE(es.update(2, 0.0));
  CHECK_FALSE(es.should_stop());
  CHECK_FALSE(es.update(3, 0.0));
  CHECK(es.should_stop());
  CHECK(es.best_epoch() == 1);
}

TEST_CASE("learning rate schedule halves after each milestone") {
  TrainConfig c;
  CHECK(c.learning_rate_for(1) == 5e-4);
  CHECK(c.learning_rate_for(50) == 5e-4);
  CHECK(c.learning_rate_for(51) == 2.5e-4);
  CHECK(c.learning_rate_for(100) == 2.5e-4);
  CHECK(c.learning_rate_for(101) == 1.25e-4);
}

TEST_CASE("train config validation names the bad key") {
  TrainConfig c;
  c.beta1 = 1.5;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("beta1") != std::string::npos);
  }
  TrainConfig b;
  b.batch_size = 0;
  CHECK_THROWS_AS(b.validate(), ConfigError);
  TrainConfig a;
  a.ablation.ct_only = a.ablation.tc_only = true;
  CHECK_THROWS(a.validate());
}

TEST_CASE("confusion matrix accounting") {
  const std::vector<int> labels{0, 1, 2, 3, 3, 2};
  const std::vector<int> preds{0, 2, 2, 3, 1, 2};
  const auto r = evaluate_predictions(labels, preds);
  CHECK(r.total == 6);
  CHECK(r.accuracy == doctest::Approx(4.0 / 6.0));
  std::size_t total = 0, diag = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      total += r.confusion[i][j];
      if (i == j) diag += r.confusion[i][j];
    }
  CHECK(total == 6);
  CHECK(diag == 4);
  CHECK(r.confusion[1][2] == 1);
  CHECK(r.confusion[3][1] == 1);
}

TEST_CASE("evaluation is independent of the batch size") {
  model::TcctModel m(small_model(), 3);
  const auto val = small_set(3, data::Split::Val, 9);
  const auto a = evaluate(val, m, {}, 64);
  const auto b = evaluate(val, m, {}, 5);
  CHECK(a.total == 12);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.confusion == b.confusion);
}

TEST_CASE("training batches double under augmentation") {
  const auto tr = small_set(2, data::Split::Train, 1);
  const auto val = small_set(1, data::Split::Val, 2);
  for (bool no_aug : {false, true}) {
    CAPTURE(no_aug);
    model::TcctModel m(small_model(), 4);
    TrainConfig c;
    c.batch_size = 4;
    c.max_epochs = 1;
    c.ablation.no_augmentation = no_aug;
    augment::SRConfig sr;
    sr.segments = 8;
    std::vector<std::size_t> sizes;
    TrainCallbacks cb;
    cb.on_batch = [&](std::size_t n) { sizes.push_back(n); };
    const auto report = train::train(tr, val, m, c, sr, model::LossConfig{}, cb);
    REQUIRE(sizes.size() == 2);
    for (auto n : sizes) CHECK(n == (no_aug ? 4u : 8u));
    CHECK(report.epochs.size() == 1);
    CHECK(report.epochs[0].samples_seen == (no_aug ? 8u : 16u));
  }
}

TEST_CASE("ct-only training leaves the tc stream untouched") {
  const auto tr = small_set(2, data::Split::Train, 1);
  const auto val = small_set(1, data::Split::Val, 2);
  model::TcctModel m(small_model(), 5);
  ParameterList tc_params;
  m.tc().collect_parameters(tc_params);
  std::vector<std::vector<double>> before;
  for (const auto& p : tc_params) before.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  ParameterList ct_params;
  m.ct().collect_parameters(ct_params);
  const std::vector<double> ct_before(ct_params[0].tensor.values().begin(),
                                      ct_params[0].tensor.values().end());

  TrainConfig c;
  c.batch_size = 8;
  c.max_epochs = 2;
  c.ablation.ct_only = true;
  const auto report = train::train(tr, val, m, c, augment::SRConfig{}, model::LossConfig{});
  CHECK(report.best_epoch >= 1);
  for (std::size_t i = 0; i < tc_params.size(); ++i) {
    const auto now = tc_params[i].tensor.values();
    CHECK(std::equal(now.begin(), now.end(), before[i].begin()));
  }
  const auto ct_now = ct_params[0].tensor.values();
  // The best epoch is restored, which is a trained state.
  CHECK_FALSE(std::equal(ct_now.begin(), ct_now.end(), ct_before.begin()));
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto tr = small_set(2, data::Split::Train, 1);
  const auto val = small_set(1, data::Split::Val, 2);
  auto run = [&] {
    model::TcctModel m(small_model(), 6);
    TrainConfig c;
    c.batch_size = 4;
    c.max_epochs = 2;
    std::vector<std::string> rows;
    TrainCallbacks cb;
    cb.on_epoch = [&](const EpochMetrics& e) {
      auto r = metrics_csv_row(e);
      rows.push_back(r.substr(0, r.rfind(',')));
    };
    train::train(tr, val, m, c, augment::SRConfig{}, model::LossConfig{}, cb);
    return rows;
  };
  const auto a = run();
  CHECK(a.size() == 2);
  CHECK(a == run());
}

TEST_CASE("train rejects feature mismatches and empty sets") {
  const auto tr = small_set(1, data::Split::Train, 1);
  data::SyntheticSpec spec;
  spec.samples_per_class = 1;
  spec.features = 3;
  spec.split = data::Split::Val;
  const auto wide = data::make_synthetic(spec);
  model::TcctModel m(small_model(), 7);
  TrainConfig c;
  c.max_epochs = 1;
  CHECK_THROWS_AS(train::train(tr, wide, m, c, {}, {}), FeatureMismatchError);
  CHECK_THROWS(train::train(data::Dataset{}, tr, m, c, {}, {}));
}

}  // TEST_SUITE
