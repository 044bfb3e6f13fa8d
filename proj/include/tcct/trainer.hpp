#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcct/augment.hpp"
#include "tcct/dataio.hpp"
#include "tcct/model.hpp"

namespace tcct::train {

struct Milestone {
  std::size_t epoch;
  double multiplier;
};

struct TrainConfig {
  double learning_rate = 0.0005;
  double beta1 = 0.6;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 72;
  std::vector<Milestone> scheduler{{50, 0.5}, {100, 0.5}};
  std::size_t early_stop_patience = 20;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 1;
  model::Ablation ablation;

  void validate() const;
  // Rate used during `epoch` (1-based): a milestone at epoch m applies from
  // epoch m + 1 on.
  double learning_rate_for(std::size_t epoch) const;
};

// Adam with bias-corrected moments; moments are aligned with `parameters`.
class Adam {
 public:
  Adam(std::vector<Tensor> parameters, double beta1, double beta2, double epsilon);

  // Every parameter must carry a gradient buffer.
  void step(double learning_rate);
  void zero_grad();

  std::size_t steps() const { return steps_; }
  const std::vector<Tensor>& parameters() const { return parameters_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor> parameters_;
  double beta1_, beta2_, epsilon_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t steps_ = 0;
};

// Tracks the best validation score; strictly greater counts as improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `metric` improves on the best seen so far.
  bool update(std::size_t epoch, double metric);
  bool should_stop() const { return patience_ > 0 && stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = -1.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
  std::size_t samples_seen = 0;  // original + synthetic samples consumed
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  bool stopped_early = false;
};

struct TrainCallbacks {
  std::function<void(const EpochMetrics&)> on_epoch;
  // Called after an epoch improves validation accuracy.
  std::function<void(model::TcctModel&, const EpochMetrics&)> on_improvement;
  // Called with the size of each assembled training batch.
  std::function<void(std::size_t)> on_batch;
  std::function<void(const std::string&)> on_warning;
};

struct EvalResult {
  double accuracy = 0.0;
  std::size_t total = 0;
  // confusion[true][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
};

// Precomputed scalograms, one [F * S * T] block per sample.
struct ScalogramCache {
  std::vector<std::vector<double>> blocks;
};

ScalogramCache compute_scalograms(const data::Dataset& dataset, const model::TcctModel& model);

EvalResult evaluate(const data::Dataset& dataset, const model::TcctModel& model,
                    const model::Ablation& ablation, std::size_t batch_size = 64,
                    const ScalogramCache* cache = nullptr);
EvalResult evaluate_predictions(std::span<const int> labels, std::span<const int> predictions);

// Trains `model` in place and leaves it holding the best-validation weights.
TrainReport train(const data::Dataset& train_set, const data::Dataset& val_set,
                  model::TcctModel& model, const TrainConfig& config,
                  const augment::SRConfig& augmentation, const model::LossConfig& loss,
                  const TrainCallbacks& callbacks = {});

inline constexpr const char* kMetricsHeader = "epoch,train_loss,train_acc,val_acc,lr,seconds";
std::string metrics_csv_row(const EpochMetrics& m);

}  // namespace tcct::train
