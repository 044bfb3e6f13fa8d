#include "tcct/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "tcct/errors.hpp"

namespace tcct::model {

void Ablation::validate() const {
  if (ct_only && tc_only) throw std::invalid_argument("ablation: ct_only and tc_only are exclusive");
}

void ModelConfig::set_input(std::size_t features, std::size_t length) {
  ct.features = tc.features = features;
  ct.signal_length = tc.signal_length = length;
}

void ModelConfig::validate() const {
  ct.validate();
  tc.validate();
  morlet.validate();
  if (ct.features != tc.features) throw std::invalid_argument("streams disagree on feature count");
  if (ct.signal_length != tc.signal_length) throw std::invalid_argument("streams disagree on signal length");
  if (ct.num_classes != tc.num_classes) throw std::invalid_argument("streams disagree on class count");
  scale_grid().validate();
}

wavelet::ScaleGrid ModelConfig::scale_grid() const {
  return wavelet::ScaleGrid::from_frequency_band(f_min, f_max, tc.scales, sampling_rate, morlet);
}

Tensor make_ct_input(std::span<const SignalMatrix> batch) {
  if (batch.empty()) throw std::invalid_argument("make_ct_input needs a nonempty batch");
  const std::size_t f = batch.front().features, t = batch.front().length;
  std::vector<double> data;
  data.reserve(batch.size() * f * t);
  for (const auto& m : batch) {
    if (m.features != f || m.length != t) {
      throw ShapeError("make_ct_input: batch mixes signal shapes");
    }
    data.insert(data.end(), m.data.begin(), m.data.end());
  }
  return Tensor({batch.size(), 1, f, t}, std::move(data), false);
}

namespace {
CTStream build_ct(const ModelConfig& config, Rng& rng) {
  config.validate();
  return CTStream(config.ct, rng);
}
}  // namespace

TcctModel::TcctModel(const ModelConfig& config, std::uint64_t seed)
    : TcctModel(config, Rng(seed)) {}

// Delegation target keeps construction order (ct before tc) tied to one rng.
TcctModel::TcctModel(const ModelConfig& config, Rng rng)
    : config_(config),
      plan_(std::make_shared<const wavelet::CwtPlan>(config.scale_grid(), config.morlet,
                                                     config.tc.signal_length)),
      ct_(build_ct(config, rng)),
      tc_(config.tc, rng),
      fusion_(FusionWeights::create(config.fusion_init)) {}

FusedOutput TcctModel::forward(const Tensor& ct_input, const Tensor& tc_input,
                               const ForwardContext& ctx, const Ablation& ablation) {
  ablation.validate();
  Tensor ct_scores, tc_scores;
  if (ablation.uses_ct()) ct_scores = ct_.forward(ct_input, ctx, !ablation.no_attention);
  if (ablation.uses_tc()) tc_scores = tc_.forward(tc_input, ctx);
  return fuse(ct_scores, tc_scores, fusion_, config_.fusion);
}

FusedOutput TcctModel::infer(const Tensor& ct_input, const Tensor& tc_input,
                             const Ablation& ablation) const {
  ablation.validate();
  NoGradGuard no_grad;
  Tensor ct_scores, tc_scores;
  if (ablation.uses_ct()) ct_scores = ct_.infer(ct_input, !ablation.no_attention);
  if (ablation.uses_tc()) tc_scores = tc_.infer(tc_input);
  return fuse(ct_scores, tc_scores, fusion_, config_.fusion);
}

FusedOutput TcctModel::infer(std::span<const SignalMatrix> batch, const Ablation& ablation) const {
  for (const auto& m : batch) {
    if (m.features != config_.ct.features) {
      throw FeatureMismatchError("model expects " + std::to_string(config_.ct.features) +
                                 " features, sample has " + std::to_string(m.features));
    }
  }
  Tensor ct_in, tc_in;
  if (ablation.uses_ct()) ct_in = make_ct_input(batch);
  if (ablation.uses_tc()) tc_in = tc_transform(batch, *plan_);
  return infer(ct_in, tc_in, ablation);
}

ParameterList TcctModel::parameters(const Ablation& ablation) const {
  ablation.validate();
  ParameterList out;
  if (ablation.uses_ct()) ct_.collect_parameters(out, !ablation.no_attention);
  if (ablation.uses_tc()) tc_.collect_parameters(out);
  fusion_.collect(out, ablation.uses_ct(), ablation.uses_tc());
  return out;
}

ParameterList TcctModel::all_parameters() const { return parameters(Ablation{}); }

BufferList TcctModel::buffers() {
  BufferList out;
  ct_.collect_buffers(out);
  tc_.collect_buffers(out);
  return out;
}

ModelSnapshot take_snapshot(TcctModel& model) {
  ModelSnapshot snap;
  for (const auto& p : model.all_parameters()) {
    const auto v = p.tensor.values();
    snap.parameters.emplace_back(v.begin(), v.end());
  }
  for (const auto& b : model.buffers()) snap.buffers.push_back(*b.values);
  return snap;
}

void restore_snapshot(TcctModel& model, const ModelSnapshot& snapshot) {
  auto params = model.all_parameters();
  auto buffers = model.buffers();
  if (params.size() != snapshot.parameters.size() || buffers.size() != snapshot.buffers.size()) {
    throw std::invalid_argument("snapshot does not match model layout");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    std::copy(snapshot.parameters[i].begin(), snapshot.parameters[i].end(), dst.begin());
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].values = snapshot.buffers[i];
}

}  // namespace tcct::model
