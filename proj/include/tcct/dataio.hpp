#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcct/errors.hpp"
#include "tcct/signal.hpp"

namespace tcct::data {

enum class Split { Train, Val, Test };

Split parse_split(std::string_view text);
std::string_view split_name(Split split);

// "Not-Engaged" -> 0 ... "Highly-Engaged" -> 3.
int parse_label(std::string_view text);
std::string_view label_name(int label);

struct Dataset {
  std::vector<LabeledSample> samples;
  Split split = Split::Train;
  std::vector<std::string> features;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t feature_count() const { return features.size(); }
};

// Trims to the first `target` columns, or tiles the signal end-to-end and
// cuts the excess when shorter.
SignalMatrix normalize_length(const SignalMatrix& raw, std::size_t target = kSignalLength);

struct LoadOptions {
  std::size_t target_length = kSignalLength;
  // Training rows shorter than this are dropped; other splits are tiled.
  std::size_t min_train_length = 84;
};

// Parses one per-sample CSV and returns the requested feature columns in the
// requested order, at their raw length.
SignalMatrix read_sample_csv(const std::filesystem::path& file,
                             const std::vector<std::string>& features);

// Loads the rows of `manifest` that belong to `split`. Sample paths are
// resolved against `root`. Rows whose file is missing or too short for
// training are skipped; the reason is appended to `warnings` when given.
Dataset load_dataset(const std::filesystem::path& root, const std::filesystem::path& manifest,
                     const std::vector<std::string>& features, Split split,
                     const LoadOptions& options = {},
                     std::vector<std::string>* warnings = nullptr);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kMinStddev = 1e-8;

// Without stats: estimates per-feature mean/std over `dataset` and applies
// them. With stats: applies the supplied values. Features whose std is below
// kMinStddev pass through unchanged.
std::pair<Dataset, FeatureStats> standardize(const Dataset& dataset,
                                             const std::optional<FeatureStats>& stats = std::nullopt);
void apply_standardization(SignalMatrix& matrix, const FeatureStats& stats);

// Writes a sample CSV (header of feature names, one row per frame).
void write_sample_csv(const std::filesystem::path& file, const SignalMatrix& matrix);

struct ManifestRow {
  std::string sample_id;
  std::string path;
  std::string label;
  std::string split;
};

void write_manifest(const std::filesystem::path& file, const std::vector<ManifestRow>& rows);

}  // namespace tcct::data
