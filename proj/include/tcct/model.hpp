#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tcct/fusion.hpp"
#include "tcct/signal.hpp"
#include "tcct/stream_ct.hpp"
#include "tcct/stream_tc.hpp"
#include "tcct/wavelet.hpp"

namespace tcct::model {

// Table-style ablation switches.
struct Ablation {
  bool ct_only = false;
  bool tc_only = false;
  bool no_attention = false;
  bool no_augmentation = false;

  void validate() const;
  bool uses_ct() const { return !tc_only; }
  bool uses_tc() const { return !ct_only; }
};

struct ModelConfig {
  CTConfig ct;
  TCConfig tc;
  wavelet::MorletParams morlet;
  double f_min = 0.1;
  double f_max = 15.0;
  double sampling_rate = 30.0;
  FusionMode fusion = FusionMode::Logits;
  double fusion_init = 0.5;

  // Sets the shared feature count and signal length on both streams.
  void set_input(std::size_t features, std::size_t length);
  void validate() const;
  wavelet::ScaleGrid scale_grid() const;
};

// [N, 1, F, T] input for the temporal-spatial stream.
Tensor make_ct_input(std::span<const SignalMatrix> batch);

// Both streams plus the fusion weights.
class TcctModel {
 public:
  TcctModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const wavelet::CwtPlan& plan() const { return *plan_; }
  CTStream& ct() { return ct_; }
  TCStream& tc() { return tc_; }
  const CTStream& ct() const { return ct_; }
  const TCStream& tc() const { return tc_; }
  FusionWeights& fusion_weights() { return fusion_; }
  const FusionWeights& fusion_weights() const { return fusion_; }

  // Either input may be undefined when its stream is disabled by `ablation`.
  FusedOutput forward(const Tensor& ct_input, const Tensor& tc_input, const ForwardContext& ctx,
                      const Ablation& ablation);
  FusedOutput infer(const Tensor& ct_input, const Tensor& tc_input, const Ablation& ablation) const;
  // Transform + both streams + fusion in eval mode.
  FusedOutput infer(std::span<const SignalMatrix> batch, const Ablation& ablation) const;

  // Learnable tensors taking part under `ablation`.
  ParameterList parameters(const Ablation& ablation) const;
  ParameterList all_parameters() const;
  BufferList buffers();

 private:
  TcctModel(const ModelConfig& config, Rng rng);

  ModelConfig config_;
  std::shared_ptr<const wavelet::CwtPlan> plan_;
  CTStream ct_;
  TCStream tc_;
  FusionWeights fusion_;
};

// Deep copy of parameter values and buffers, used for best-epoch restore.
struct ModelSnapshot {
  std::vector<std::vector<double>> parameters;
  std::vector<std::vector<double>> buffers;
};

ModelSnapshot take_snapshot(TcctModel& model);
void restore_snapshot(TcctModel& model, const ModelSnapshot& snapshot);

}  // namespace tcct::model
