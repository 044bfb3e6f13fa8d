#include "tcct/wavelet.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>


namespace tcct::wavelet {

void MorletParams::validate() const {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("morlet bandwidth must be positive");
  if (!(center_frequency > 0.0)) {
    throw std::invalid_argument("morlet center frequency must be positive");
  }
}

void ScaleGrid::validate() const {
  if (scales.empty()) throw std::invalid_argument("scale grid is empty");
  if (!(sampling_rate > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  for (std::size_t k = 0; k < scales.size(); ++k) {
    if (!(scales[k] > 0.0)) throw std::invalid_argument("scales must be positive");
    if (k > 0 && !(scales[k] > scales[k - 1])) {
      throw std::invalid_argument("scales must be strictly increasing");
    }
  }
}

double ScaleGrid::frequency(std::size_t k, const MorletParams& morlet) const {
  return morlet.center_frequency / scales.at(k);
}

ScaleGrid ScaleGrid::from_frequency_band(double f_min, double f_max, std::size_t count,
                                         double sampling_rate, const MorletParams& morlet) {
  if (count == 0) throw std::invalid_argument("scale count must be >= 1");
  if (!(f_min > 0.0) || !(f_max >= f_min)) throw std::invalid_argument("invalid frequency band");
  if (count > 1 && !(f_max > f_min)) throw std::invalid_argument("invalid frequency band");
  ScaleGrid grid;
  grid.sampling_rate = sampling_rate;
  grid.scales.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
    const double f = f_max * std::pow(f_min / f_max, frac);
    grid.scales[k] = morlet.center_frequency / f;
  }
  grid.validate();
  return grid;
}

ScaleGrid ScaleGrid::default_grid(const MorletParams& morlet) {
  return from_frequency_band(0.1, 15.0, 32, 30.0, morlet);
}

std::complex<double> morlet_sample(double t, const MorletParams& params) {
  const double norm = 1.0 / std::sqrt(std::numbers::pi * params.bandwidth);
  const double envelope = std::exp(-t * t / params.bandwidth);
  const double phase = 2.0 * std::numbers::pi * params.center_frequency * t;
  return norm * envelope * std::complex<double>(std::cos(phase), std::sin(phase));
}

CwtPlan::CwtPlan(ScaleGrid grid, MorletParams morlet, std::size_t length)
    : grid_(std::move(grid)), morlet_(morlet), length_(length) {
  grid_.validate();
  morlet_.validate();
  if (length_ < 2) throw std::invalid_argument("cwt needs at least two samples");
  const double fs = grid_.sampling_rate;
  // exp(-u^2 / B) < cutoff  <=>  |u| > sqrt(B ln(1 / cutoff))
  const double u_max = std::sqrt(morlet_.bandwidth * std::log(1.0 / kSupportCutoff));
  const std::size_t count = grid_.size();
  half_width_.resize(count);
  kernel_re_.resize(count);
  kernel_im_.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double s = grid_.scales[k];
    const double reach = std::floor(u_max * fs * s);
    const std::size_t m = reach >= static_cast<double>(length_ - 1)
                              ? length_ - 1
                              : static_cast<std::size_t>(reach);
    half_width_[k] = m;
    // (1 / sqrt(s)) * conj(psi(u)) * dt with dt = 1 / fs
    const double weight = 1.0 / (std::sqrt(s) * fs);
    auto& re = kernel_re_[k];
    auto& im = kernel_im_[k];
    re.resize(2 * m + 1);
    im.resize(2 * m + 1);
    for (std::size_t j = 0; j < 2 * m + 1; ++j) {
      const double offset = static_cast<double>(j) - static_cast<double>(m);
      const auto psi = std::conj(morlet_sample(offset / (fs * s), morlet_));
      re[j] = weight * psi.real();
      im[j] = weight * psi.imag();
    }
  }
}

void CwtPlan::check_signal(std::span<const double> signal) const {
  if (signal.empty()) throw std::invalid_argument("cwt of an empty signal");
  if (signal.size() != length_) {
    throw std::invalid_argument("signal length " + std::to_string(signal.size()) +
                                " does not match plan length " + std::to_string(length_));
  }
}

namespace {

template <typename Sink>
void run_plan(std::span<const double> x, std::size_t length, std::size_t m,
              const std::vector<double>& re, const std::vector<double>& im, Sink&& sink) {
  const long t_len = static_cast<long>(length);
  const long half = static_cast<long>(m);
  for (long n = 0; n < t_len; ++n) {
    const long lo = std::max(-half, -n);
    const long hi = std::min(half, t_len - 1 - n);
    const double* xs = x.data() + n + lo;
    const double* kr = re.data() + (lo + half);
    const double* ki = im.data() + (lo + half);
    const long count = hi - lo + 1;
    // Four fixed lanes: fast, and independent of buffer alignment.
    double r[4] = {0, 0, 0, 0}, i[4] = {0, 0, 0, 0};
    long j = 0;
    for (; j + 4 <= count; j += 4)
      for (int l = 0; l < 4; ++l) {
        r[l] += xs[j + l] * kr[j + l];
        i[l] += xs[j + l] * ki[j + l];
      }
    for (; j < count; ++j) {
      r[0] += xs[j] * kr[j];
      i[0] += xs[j] * ki[j];
    }
    sink(static_cast<std::size_t>(n), (r[0] + r[1]) + (r[2] + r[3]), (i[0] + i[1]) + (i[2] + i[3]));
  }
}

}  // namespace

ComplexMatrix CwtPlan::transform(std::span<const double> signal) const {
  check_signal(signal);
  ComplexMatrix out{grid_.size(), length_, std::vector<std::complex<double>>(grid_.size() * length_)};
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    auto* row = out.data.data() + k * length_;
    run_plan(signal, length_, half_width_[k], kernel_re_[k], kernel_im_[k],
             [row](std::size_t n, double r, double i) { row[n] = {r, i}; });
  }
  return out;
}

void CwtPlan::magnitudes(std::span<const double> signal, std::span<double> out) const {
  check_signal(signal);
  if (out.size() != grid_.size() * length_) {
    throw std::invalid_argument("magnitude buffer has wrong size");
  }
  for (std::size_t k = 0; k < grid_.size(); ++k) {
    double* row = out.data() + k * length_;
    run_plan(signal, length_, half_width_[k], kernel_re_[k], kernel_im_[k],
             [row](std::size_t n, double r, double i) { row[n] = std::sqrt(r * r + i * i); });
  }
}

ComplexMatrix cwt(std::span<const double> signal, const ScaleGrid& grid, const MorletParams& params) {
  if (signal.empty()) throw std::invalid_argument("cwt of an empty signal");
  return CwtPlan(grid, params, signal.size()).transform(signal);
}

Scalogram scalogram(const SignalMatrix& matrix, const CwtPlan& plan) {
  if (matrix.features == 0) throw std::invalid_argument("scalogram needs at least one feature");
  if (matrix.data.size() != matrix.features * matrix.length) {
    throw std::invalid_argument("ragged signal matrix: " + std::to_string(matrix.data.size()) +
                                " values for " + std::to_string(matrix.features) + " rows of " +
                                std::to_string(matrix.length));
  }
  Scalogram out;
  out.features = matrix.features;
  out.scales = plan.scales();
  out.length = matrix.length;
  out.grid = plan.grid();
  out.feature_names = matrix.feature_names;
  out.data.resize(out.features * out.scales * out.length);
  const std::size_t slab = out.scales * out.length;
  for (std::size_t f = 0; f < matrix.features; ++f) {
    plan.magnitudes(matrix.row(f), std::span<double>(out.data).subspan(f * slab, slab));
  }
  return out;
}

Scalogram scalogram(const SignalMatrix& matrix, const ScaleGrid& grid, const MorletParams& params) {
  return scalogram(matrix, CwtPlan(grid, params, matrix.length));
}

}  // namespace tcct::wavelet
