#include "tcct/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "tcct/errors.hpp"

namespace tcct::train {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in (0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  for (const auto& m : scheduler) {
    if (!(m.multiplier > 0.0)) throw ConfigError("train.milestones multipliers must be > 0");
  }
  if (ablation.ct_only && ablation.tc_only) {
    throw ConfigError("train.ct_only and train.tc_only cannot both be set");
  }
}

double TrainConfig::learning_rate_for(std::size_t epoch) const {
  double lr = learning_rate;
  for (const auto& m : scheduler) {
    if (epoch > m.epoch) lr *= m.multiplier;
  }
  return lr;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> parameters, double beta1, double beta2, double epsilon)
    : parameters_(std::move(parameters)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  m_.reserve(parameters_.size());
  v_.reserve(parameters_.size());
  for (const auto& p : parameters_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : parameters_) p.zero_grad();
}

void Adam::step(double learning_rate) {
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    if (!parameters_[i].has_grad()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " " +
                                  shape_str(parameters_[i].shape()) + " has no gradient");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < parameters_.size(); ++i) {
    auto values = parameters_[i].mutable_values();
    const auto grad = parameters_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

// ---------------------------------------------------------------------------

bool EarlyStopping::update(std::size_t epoch, double metric) {
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------

namespace {

void check_features(const data::Dataset& ds, const model::TcctModel& model) {
  const std::size_t expected = model.config().ct.features;
  for (const auto& s : ds.samples) {
    if (s.signals.features != expected) {
      throw FeatureMismatchError("model expects " + std::to_string(expected) +
                                 " features, data has " + std::to_string(s.signals.features));
    }
    if (s.signals.length != model.config().ct.signal_length) {
      throw FeatureMismatchError("model expects signals of length " +
                                 std::to_string(model.config().ct.signal_length) + ", data has " +
                                 std::to_string(s.signals.length));
    }
  }
}

std::vector<double> scalogram_block(const SignalMatrix& m, const wavelet::CwtPlan& plan) {
  const std::size_t slab = plan.scales() * plan.length();
  std::vector<double> block(m.features * slab);
  for (std::size_t f = 0; f < m.features; ++f) {
    plan.magnitudes(m.row(f), std::span<double>(block).subspan(f * slab, slab));
  }
  return block;
}

}  // namespace

ScalogramCache compute_scalograms(const data::Dataset& dataset, const model::TcctModel& model) {
  ScalogramCache cache;
  cache.blocks.reserve(dataset.size());
  for (const auto& s : dataset.samples) cache.blocks.push_back(scalogram_block(s.signals, model.plan()));
  return cache;
}

EvalResult evaluate_predictions(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) throw std::invalid_argument("label/prediction count mismatch");
  EvalResult r;
  r.total = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    r.confusion.at(static_cast<std::size_t>(labels[i])).at(static_cast<std::size_t>(predictions[i]))++;
    if (labels[i] == predictions[i]) ++correct;
  }
  r.accuracy = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
  return r;
}

EvalResult evaluate(const data::Dataset& dataset, const model::TcctModel& model,
                    const model::Ablation& ablation, std::size_t batch_size,
                    const ScalogramCache* cache) {
  if (dataset.empty()) throw std::invalid_argument("evaluate needs a nonempty dataset");
  check_features(dataset, model);
  if (batch_size == 0) batch_size = dataset.size();
  const auto& cfg = model.config();
  std::vector<int> labels, predictions;
  labels.reserve(dataset.size());
  predictions.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    std::vector<SignalMatrix> signals;
    signals.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      signals.push_back(dataset.samples[i].signals);
      labels.push_back(dataset.samples[i].label);
    }
    Tensor ct_in, tc_in;
    if (ablation.uses_ct()) ct_in = model::make_ct_input(signals);
    if (ablation.uses_tc()) {
      if (cache) {
        std::vector<const std::vector<double>*> blocks;
        for (std::size_t i = start; i < end; ++i) blocks.push_back(&cache->blocks[i]);
        tc_in = model::stack_scalograms(blocks, cfg.tc.features, cfg.tc.scales, cfg.tc.signal_length);
      } else {
        tc_in = model::tc_transform(signals, model.plan());
      }
    }
    const auto fused = model.infer(ct_in, tc_in, ablation);
    const auto pred = model::predict(fused.probs);
    predictions.insert(predictions.end(), pred.begin(), pred.end());
  }
  return evaluate_predictions(labels, predictions);
}

TrainReport train(const data::Dataset& train_set, const data::Dataset& val_set,
                  model::TcctModel& model, const TrainConfig& config,
                  const augment::SRConfig& augmentation, const model::LossConfig& loss,
                  const TrainCallbacks& callbacks) {
  config.validate();
  loss.validate();
  const auto& ablation = config.ablation;
  if (!ablation.no_augmentation) augmentation.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (val_set.empty()) throw std::invalid_argument("validation set is empty");
  check_features(train_set, model);
  check_features(val_set, model);

  {
    std::map<int, std::size_t> counts;
    for (const auto& s : train_set.samples) counts[s.label]++;
    for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
      if (counts[c] == 0 && callbacks.on_warning) {
        callbacks.on_warning("class " + std::string(data::label_name(c)) +
                             " has no training samples");
      }
    }
  }

  const auto& cfg = model.config();
  const bool use_tc = ablation.uses_tc();
  ScalogramCache train_cache, val_cache;
  if (use_tc) {
    train_cache = compute_scalograms(train_set, model);
    val_cache = compute_scalograms(val_set, model);
  }

  const auto named = model.parameters(ablation);
  std::vector<Tensor> params;
  params.reserve(named.size());
  for (const auto& p : named) params.push_back(p.tensor);
  Adam adam(params, config.beta1, config.beta2, config.adam_epsilon);

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  EarlyStopping stopper(config.early_stop_patience);
  std::optional<model::ModelSnapshot> best;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = config.learning_rate_for(epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0, correct = 0, originals_seen = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<LabeledSample> originals;
      originals.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) originals.push_back(train_set.samples[order[i]]);

      std::vector<LabeledSample> synthetic;
      if (!ablation.no_augmentation) {
        augment::SRConfig sr = augmentation;
        sr.seed = rng();
        synthetic = augment::sr_augment(originals, sr);
      }

      std::vector<SignalMatrix> signals;
      std::vector<int> labels;
      signals.reserve(originals.size() + synthetic.size());
      for (const auto* group : {&originals, &synthetic}) {
        for (const auto& s : *group) {
          signals.push_back(s.signals);
          labels.push_back(s.label);
        }
      }
      if (callbacks.on_batch) callbacks.on_batch(signals.size());

      Tensor ct_in, tc_in;
      if (ablation.uses_ct()) ct_in = model::make_ct_input(signals);
      if (use_tc) {
        std::vector<std::vector<double>> fresh;
        fresh.reserve(synthetic.size());
        for (const auto& s : synthetic) fresh.push_back(scalogram_block(s.signals, model.plan()));
        std::vector<const std::vector<double>*> blocks;
        for (std::size_t i = start; i < end; ++i) blocks.push_back(&train_cache.blocks[order[i]]);
        for (const auto& b : fresh) blocks.push_back(&b);
        tc_in = model::stack_scalograms(blocks, cfg.tc.features, cfg.tc.scales, cfg.tc.signal_length);
      }

      ForwardContext ctx{true, &rng};
      const auto fused = model.forward(ct_in, tc_in, ctx, ablation);
      Tensor objective = model::combined_loss(fused, labels, named, loss);
      adam.zero_grad();
      objective.backward();
      adam.step(lr);

      loss_sum += objective.item() * static_cast<double>(labels.size());
      loss_count += labels.size();
      const auto pred = model::predict(fused.probs);
      for (std::size_t i = 0; i < originals.size(); ++i) {
        if (pred[i] == originals[i].label) ++correct;
      }
      originals_seen += originals.size();
      seen += signals.size();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(loss_count);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(originals_seen);
    m.val_acc = evaluate(val_set, model, ablation, 64, use_tc ? &val_cache : nullptr).accuracy;
    m.learning_rate = lr;
    m.samples_seen = seen;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(m);
    if (callbacks.on_epoch) callbacks.on_epoch(m);

    if (stopper.update(epoch, m.val_acc)) {
      best = model::take_snapshot(model);
      if (callbacks.on_improvement) callbacks.on_improvement(model, m);
    }
    if (stopper.should_stop()) {
      report.stopped_early = true;
      break;
    }
  }

  report.best_epoch = stopper.best_epoch();
  report.best_val_acc = stopper.best_metric();
  if (best) model::restore_snapshot(model, *best);
  return report;
}

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.6f", m.epoch, m.train_loss,
                m.train_acc, m.val_acc, m.learning_rate, m.seconds);
  return buf;
}

}  // namespace tcct::train
