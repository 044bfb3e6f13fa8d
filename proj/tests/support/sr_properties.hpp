#pragma once

#include <algorithm>
#include <random>
#include <string>

#include "tcct/augment.hpp"

namespace tcct::testing {

struct SRPropertyReport {
  std::size_t trials = 0;
  std::size_t label_failures = 0;
  std::size_t provenance_failures = 0;
  std::size_t count_failures = 0;
  std::size_t single_donor_failures = 0;
  std::size_t determinism_failures = 0;

  bool ok() const {
    return label_failures + provenance_failures + count_failures + single_donor_failures +
               determinism_failures == 0;
  }
};

inline bool same_segment(const SignalMatrix& a, const SignalMatrix& b, std::size_t pos, std::size_t seg) {
  for (std::size_t f = 0; f < a.features; ++f) {
    const auto ra = a.row(f).subspan(pos * seg, seg), rb = b.row(f).subspan(pos * seg, seg);
    if (!std::equal(ra.begin(), ra.end(), rb.begin())) return false;
  }
  return true;
}

// Random batches (sizes, class mixes, segment counts); each trial includes a
// class with exactly one member.
inline SRPropertyReport check_sr_properties(std::size_t trials, std::uint64_t seed) {
  SRPropertyReport report;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t segment_options[] = {1, 2, 4, 5, 7, 8, 10, 14, 20, 28, 35, 40, 56, 70, 140, 280};
  for (std::size_t trial = 0; trial < trials; ++trial) {
    augment::SRConfig cfg;
    cfg.segments = segment_options[rng() % std::size(segment_options)];
    cfg.seed = rng();
    const std::size_t features = 1 + rng() % 3;
    const std::size_t n = 2 + rng() % 11;
    const int lonely = static_cast<int>(rng() % kNumClasses);
    std::vector<LabeledSample> batch(n);
    for (std::size_t i = 0; i < n; ++i) {
      int label = static_cast<int>(rng() % kNumClasses);
      if (i == 0) label = lonely;
      else if (label == lonely) label = (lonely + 1) % static_cast<int>(kNumClasses);
      batch[i].label = label;
      batch[i].signals = SignalMatrix(features, cfg.signal_length);
      batch[i].signals.sample_id = "s" + std::to_string(i);
      for (auto& v : batch[i].signals.data) v = noise(rng);
    }
    const auto out = augment::sr_augment(batch, cfg);
    const auto again = augment::sr_augment(batch, cfg);
    ++report.trials;
    if (out.size() != batch.size() || batch.size() + out.size() != 2 * n) ++report.count_failures;
    const std::size_t seg = cfg.segment_length();
    for (std::size_t i = 0; i < std::min(out.size(), batch.size()); ++i) {
      const auto& synth = out[i];
      if (synth.label != batch[i].label) ++report.label_failures;
      for (std::size_t pos = 0; pos < cfg.segments; ++pos) {
        const bool found = std::any_of(batch.begin(), batch.end(), [&](const LabeledSample& d) {
          return d.label == synth.label && same_segment(d.signals, synth.signals, pos, seg);
        });
        if (!found) ++report.provenance_failures;
      }
      if (batch[i].label == lonely && synth.signals.data != batch[0].signals.data) {
        ++report.single_donor_failures;
      }
      if (i >= again.size() || again[i].signals.data != synth.signals.data ||
          again[i].label != synth.label) {
        ++report.determinism_failures;
      }
    }
  }
  return report;
}

}  // namespace tcct::testing
