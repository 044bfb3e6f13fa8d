#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcct/dataio.hpp"

namespace tcct::data {

// Class-conditional sinusoid fixture: class k oscillates at
// class_frequencies[k] Hz in every channel, with per-sample frequency,
// amplitude and phase jitter plus white Gaussian noise.
struct SyntheticSpec {
  std::size_t samples_per_class = 100;
  std::size_t features = 2;
  std::size_t length = kSignalLength;
  double sampling_rate = 30.0;
  std::vector<double> class_frequencies{0.6, 1.2, 2.4, 4.8};
  double frequency_jitter = 0.08;  // relative, uniform in [-j, j]
  double amplitude_jitter = 0.2;
  double noise_stddev = 1.0;
  std::uint64_t seed = 7;
  Split split = Split::Train;

  void validate() const;
};

std::vector<std::string> synthetic_feature_names(std::size_t features);

// Samples are interleaved by class (0, 1, 2, 3, 0, 1, ...).
Dataset make_synthetic(const SyntheticSpec& spec);

// Writes every sample as a CSV under `root/samples` and appends its rows to
// `rows`; paths in the rows are relative to `root`.
void export_dataset(const Dataset& dataset, const std::filesystem::path& root,
                    std::vector<ManifestRow>& rows);

// Generates train/val/test splits (per-class counts, zero skips a split),
// exports them under `root` and writes root/manifest.csv. Each split uses
// seed spec.seed + its position among the generated splits.
std::vector<ManifestRow> write_synthetic_corpus(const std::filesystem::path& root,
                                                const SyntheticSpec& spec, std::size_t train,
                                                std::size_t val, std::size_t test = 0);

}  // namespace tcct::data
