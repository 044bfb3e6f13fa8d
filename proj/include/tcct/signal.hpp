#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tcct {

// Engagement levels in index order.
enum class Engagement : int {
  NotEngaged = 0,
  BarelyEngaged = 1,
  Engaged = 2,
  HighlyEngaged = 3,
};

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::size_t kSignalLength = 280;

// F x T matrix of behavioral feature signals, row-major (one row per feature).
struct SignalMatrix {
  std::size_t features = 0;
  std::size_t length = 0;
  std::vector<double> data;
  std::vector<std::string> feature_names;
  std::string sample_id;

  SignalMatrix() = default;
  SignalMatrix(std::size_t features, std::size_t length)
      : features(features), length(length), data(features * length, 0.0) {}

  std::span<const double> row(std::size_t f) const {
    return std::span<const double>(data).subspan(f * length, length);
  }
  std::span<double> row(std::size_t f) {
    return std::span<double>(data).subspan(f * length, length);
  }
  double& operator()(std::size_t f, std::size_t t) { return data[f * length + t]; }
  double operator()(std::size_t f, std::size_t t) const { return data[f * length + t]; }
};

struct LabeledSample {
  SignalMatrix signals;
  int label = 0;
};

}  // namespace tcct
