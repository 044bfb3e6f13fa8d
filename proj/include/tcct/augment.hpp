#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tcct/ops.hpp"
#include "tcct/signal.hpp"

namespace tcct::augment {

// Segmentation-and-recombination settings.
struct SRConfig {
  std::size_t segments = 4;
  std::uint64_t seed = 0;
  std::size_t signal_length = kSignalLength;

  void validate() const;
  std::size_t segment_length() const { return signal_length / segments; }
};

// Builds one synthetic sample per input sample. Each synthetic sample keeps
// its template's label; segment position j is copied (all feature rows
// together) from a donor drawn uniformly, with replacement, among the batch
// members of that label.
std::vector<LabeledSample> sr_augment(std::span<const LabeledSample> batch, const SRConfig& config);
std::vector<LabeledSample> sr_augment(std::span<const LabeledSample> batch, const SRConfig& config,
                                      Rng& rng);

}  // namespace tcct::augment
