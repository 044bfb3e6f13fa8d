#include "tcct/augment.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace tcct::augment {

void SRConfig::validate() const {
  if (segments < 1) throw std::invalid_argument("augment.segments must be >= 1");
  if (signal_length == 0 || signal_length % segments != 0) {
    throw std::invalid_argument("augment.segments (" + std::to_string(segments) +
                                ") must divide the signal length " + std::to_string(signal_length));
  }
}

std::vector<LabeledSample> sr_augment(std::span<const LabeledSample> batch, const SRConfig& config) {
  Rng rng(config.seed);
  return sr_augment(batch, config, rng);
}

std::vector<LabeledSample> sr_augment(std::span<const LabeledSample> batch, const SRConfig& config,
                                      Rng& rng) {
  config.validate();
  if (batch.empty()) throw std::invalid_argument("sr_augment needs a nonempty batch");
  const std::size_t features = batch.front().signals.features;
  for (const auto& s : batch) {
    if (s.signals.length != config.signal_length) {
      throw std::invalid_argument("sample '" + s.signals.sample_id + "' has length " +
                                  std::to_string(s.signals.length) + ", expected " +
                                  std::to_string(config.signal_length));
    }
    if (s.signals.features != features) {
      throw std::invalid_argument("batch mixes feature counts");
    }
  }

  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < batch.size(); ++i) members[batch[i].label].push_back(i);

  const std::size_t seg = config.segment_length();
  std::vector<LabeledSample> out;
  out.reserve(batch.size());
  for (const auto& tmpl : batch) {
    const auto& donors = members.at(tmpl.label);
    std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
    LabeledSample synth;
    synth.label = tmpl.label;
    synth.signals = SignalMatrix(features, config.signal_length);
    synth.signals.feature_names = tmpl.signals.feature_names;
    synth.signals.sample_id = tmpl.signals.sample_id + "#sr";
    for (std::size_t pos = 0; pos < config.segments; ++pos) {
      const auto& donor = batch[donors[pick(rng)]].signals;
      for (std::size_t f = 0; f < features; ++f) {
        const auto src = donor.row(f).subspan(pos * seg, seg);
        std::copy(src.begin(), src.end(), synth.signals.row(f).begin() + pos * seg);
      }
    }
    out.push_back(std::move(synth));
  }
  return out;
}

}  // namespace tcct::augment
