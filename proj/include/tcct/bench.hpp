#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tcct/dataio.hpp"
#include "tcct/model.hpp"

namespace tcct::bench {

struct BenchOptions {
  std::size_t warmup = 5;
  std::size_t iters = 100;
  std::size_t batch_size = 8;  // for the whole-split pass
  std::size_t threads = 1;      // workers for the whole-split pass
  bool train_epoch = false;     // also time one training epoch on the split
  std::uint64_t seed = 1;

  void validate() const;
};

// Times are milliseconds unless the name says seconds. Latency covers the
// scalogram transform, both streams and fusion for one sample; file parsing
// is never inside a timed region.
struct BenchReport {
  std::size_t warmup = 0;
  std::size_t iters = 0;
  double latency_mean_ms = 0.0;
  double latency_p50_ms = 0.0;
  double latency_p95_ms = 0.0;
  double transform_mean_ms = 0.0;
  double forward_mean_ms = 0.0;
  std::size_t split_size = 0;
  double split_seconds = 0.0;
  double split_transform_seconds = 0.0;
  double train_epoch_seconds = -1.0;  // negative when not measured
  std::size_t threads = 1;
  std::vector<double> latencies_ms;   // one per measured iteration
};

// Nearest-rank percentile, q in (0, 1].
double percentile(std::vector<double> values, double q);

BenchReport run_bench(const model::TcctModel& model, const data::Dataset& dataset,
                      const model::Ablation& ablation, const BenchOptions& options);

inline constexpr const char* kBenchHeader =
    "warmup,iters,latency_mean_ms,latency_p50_ms,latency_p95_ms,transform_mean_ms,"
    "forward_mean_ms,split_size,split_seconds,split_transform_seconds,train_epoch_seconds,threads";
std::string bench_csv_row(const BenchReport& report);
std::string format_report(const BenchReport& report);

}  // namespace tcct::bench
