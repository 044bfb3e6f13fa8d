#include "tcct/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "tcct/ops.hpp"

namespace tcct::data {

void SyntheticSpec::validate() const {
  if (samples_per_class == 0) throw ConfigError("synthetic: samples_per_class must be >= 1");
  if (features == 0) throw ConfigError("synthetic: features must be >= 1");
  if (length == 0) throw ConfigError("synthetic: length must be >= 1");
  if (!(sampling_rate > 0.0)) throw ConfigError("synthetic: sampling_rate must be > 0");
  if (class_frequencies.size() != kNumClasses) {
    throw ConfigError("synthetic: need one frequency per class");
  }
  if (noise_stddev < 0.0 || frequency_jitter < 0.0 || amplitude_jitter < 0.0) {
    throw ConfigError("synthetic: jitter and noise must be >= 0");
  }
}

std::vector<std::string> synthetic_feature_names(std::size_t features) {
  static const char* kNames[] = {"pose_Rx", "gaze_angle_x", "pose_Ry", "gaze_angle_y",
                                 "pose_Rz", "AU01_r",       "AU02_r",  "AU04_r",
                                 "AU05_r",  "AU06_r",       "AU07_r",  "AU09_r",
                                 "AU10_r",  "AU12_r",       "AU14_r",  "AU15_r"};
  std::vector<std::string> out;
  for (std::size_t f = 0; f < features; ++f) {
    out.push_back(f < std::size(kNames) ? kNames[f] : "feature_" + std::to_string(f));
  }
  return out;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset ds;
  ds.split = spec.split;
  ds.features = synthetic_feature_names(spec.features);
  const std::string prefix(split_name(spec.split));
  for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      LabeledSample s;
      s.label = static_cast<int>(k);
      s.signals = SignalMatrix(spec.features, spec.length);
      s.signals.feature_names = ds.features;
      s.signals.sample_id = prefix + "_" + std::to_string(i * kNumClasses + k);
      const double freq = spec.class_frequencies[k] * (1.0 + spec.frequency_jitter * unit(rng));
      const double omega = 2.0 * std::numbers::pi * freq / spec.sampling_rate;
      for (std::size_t f = 0; f < spec.features; ++f) {
        const double amp = 1.0 + spec.amplitude_jitter * unit(rng);
        const double phi = phase(rng);
        for (std::size_t t = 0; t < spec.length; ++t) {
          s.signals(f, t) = amp * std::sin(omega * static_cast<double>(t) + phi) +
                            spec.noise_stddev * noise(rng);
        }
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

void export_dataset(const Dataset& dataset, const std::filesystem::path& root,
                    std::vector<ManifestRow>& rows) {
  std::filesystem::create_directories(root / "samples");
  for (const auto& s : dataset.samples) {
    const std::string rel = "samples/" + s.signals.sample_id + ".csv";
    write_sample_csv(root / rel, s.signals);
    rows.push_back({s.signals.sample_id, rel, std::string(label_name(s.label)),
                    std::string(split_name(dataset.split))});
  }
}

std::vector<ManifestRow> write_synthetic_corpus(const std::filesystem::path& root,
                                                const SyntheticSpec& spec, std::size_t train,
                                                std::size_t val, std::size_t test) {
  std::vector<ManifestRow> rows;
  const std::pair<Split, std::size_t> parts[] = {
      {Split::Train, train}, {Split::Val, val}, {Split::Test, test}};
  std::uint64_t offset = 0;
  for (const auto& [split, count] : parts) {
    if (count == 0) continue;
    auto s = spec;
    s.split = split;
    s.samples_per_class = count;
    s.seed = spec.seed + offset++;
    export_dataset(make_synthetic(s), root, rows);
  }
  write_manifest(root / "manifest.csv", rows);
  return rows;
}

}  // namespace tcct::data
