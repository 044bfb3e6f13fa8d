#include "tcct/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tcct/errors.hpp"
#include "tcct/trainer.hpp"

namespace tcct::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Timing {
  double transform = 0.0;
  double total = 0.0;
};

Timing run_batch(const model::TcctModel& model, std::span<const SignalMatrix> batch,
                 const model::Ablation& ablation) {
  const auto t0 = Clock::now();
  Tensor tc_in;
  if (ablation.uses_tc()) tc_in = model::tc_transform(batch, model.plan());
  const double transform = seconds_since(t0);
  Tensor ct_in;
  if (ablation.uses_ct()) ct_in = model::make_ct_input(batch);
  const auto fused = model.infer(ct_in, tc_in, ablation);
  (void)model::predict(fused.probs);
  return {transform, seconds_since(t0)};
}

}  // namespace

void BenchOptions::validate() const {
  if (iters < 1) throw ConfigError("bench: iters must be >= 1");
  if (batch_size < 1) throw ConfigError("bench: batch size must be >= 1");
  if (threads < 1) throw ConfigError("bench: threads must be >= 1");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("percentile q must be in (0, 1]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

BenchReport run_bench(const model::TcctModel& model, const data::Dataset& dataset,
                      const model::Ablation& ablation, const BenchOptions& options) {
  options.validate();
  if (dataset.empty()) throw DataError("bench needs a nonempty dataset");
  for (const auto& s : dataset.samples) {
    if (s.signals.features != model.config().ct.features) {
      throw FeatureMismatchError("model expects " + std::to_string(model.config().ct.features) +
                                 " features, data has " + std::to_string(s.signals.features));
    }
  }
  BenchReport r;
  r.warmup = options.warmup;
  r.iters = options.iters;
  r.threads = options.threads;
  r.split_size = dataset.size();

  const std::size_t n = dataset.size();
  for (std::size_t i = 0; i < options.warmup; ++i) {
    run_batch(model, std::span(&dataset.samples[i % n].signals, 1), ablation);
  }
  double transform_sum = 0.0;
  r.latencies_ms.reserve(options.iters);
  for (std::size_t i = 0; i < options.iters; ++i) {
    const auto t = run_batch(model, std::span(&dataset.samples[i % n].signals, 1), ablation);
    r.latencies_ms.push_back(1e3 * t.total);
    transform_sum += 1e3 * t.transform;
  }
  const double iters = static_cast<double>(options.iters);
  r.latency_mean_ms = std::accumulate(r.latencies_ms.begin(), r.latencies_ms.end(), 0.0) / iters;
  r.latency_p50_ms = percentile(r.latencies_ms, 0.50);
  r.latency_p95_ms = percentile(r.latencies_ms, 0.95);
  r.transform_mean_ms = transform_sum / iters;
  r.forward_mean_ms = r.latency_mean_ms - r.transform_mean_ms;

  // Whole split in batches; copies are made before the clock starts.
  std::vector<SignalMatrix> signals;
  signals.reserve(n);
  for (const auto& s : dataset.samples) signals.push_back(s.signals);
  const std::size_t workers = std::min(options.threads, (n + options.batch_size - 1) / options.batch_size);
  std::vector<double> transform_per_worker(workers, 0.0);
  const auto t0 = Clock::now();
  auto work = [&](std::size_t w) {
    for (std::size_t b = w * options.batch_size; b < n; b += workers * options.batch_size) {
      const std::size_t len = std::min(options.batch_size, n - b);
      transform_per_worker[w] += run_batch(model, std::span(signals).subspan(b, len), ablation).transform;
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  r.split_seconds = seconds_since(t0);
  r.split_transform_seconds =
      *std::max_element(transform_per_worker.begin(), transform_per_worker.end());

  if (options.train_epoch) {
    // A fresh model of the same shape, so the benchmarked weights stay intact.
    model::TcctModel scratch(model.config(), options.seed);
    train::TrainConfig cfg;
    cfg.max_epochs = 1;
    cfg.seed = options.seed;
    cfg.ablation = ablation;
    augment::SRConfig sr;
    sr.signal_length = model.config().ct.signal_length;
    model::LossConfig loss;
    loss.mode = model.config().fusion;
    const auto report = train::train(dataset, dataset, scratch, cfg, sr, loss);
    r.train_epoch_seconds = report.epochs.front().seconds;
  }
  return r;
}

std::string bench_csv_row(const BenchReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%.6f,%.6f,%.6f,%zu",
                r.warmup, r.iters, r.latency_mean_ms, r.latency_p50_ms, r.latency_p95_ms,
                r.transform_mean_ms, r.forward_mean_ms, r.split_size, r.split_seconds,
                r.split_transform_seconds, r.train_epoch_seconds, r.threads);
  return buf;
}

std::string format_report(const BenchReport& r) {
  char buf[1024];
  int len = std::snprintf(
      buf, sizeof(buf),
      "warmup %zu, measured %zu single-sample runs\n"
      "latency ms    mean %.3f  p50 %.3f  p95 %.3f\n"
      "  transform   mean %.3f\n"
      "  forward     mean %.3f\n"
      "whole split   %zu samples in %.3f s (transform %.3f s, %zu thread%s)\n",
      r.warmup, r.iters, r.latency_mean_ms, r.latency_p50_ms, r.latency_p95_ms,
      r.transform_mean_ms, r.forward_mean_ms, r.split_size, r.split_seconds,
      r.split_transform_seconds, r.threads, r.threads == 1 ? "" : "s");
  std::string out(buf, static_cast<std::size_t>(len));
  if (r.train_epoch_seconds >= 0.0) {
    std::snprintf(buf, sizeof(buf), "train epoch   %.3f s\n", r.train_epoch_seconds);
    out += buf;
  }
  return out;
}

}  // namespace tcct::bench
