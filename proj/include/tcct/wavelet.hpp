#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tcct/signal.hpp"

namespace tcct::wavelet {

// psi(t) = (pi B)^(-1/2) exp(-t^2 / B) exp(2 pi i C t)
struct MorletParams {
  double bandwidth = 1.0;
  double center_frequency = 1.0;

  void validate() const;
};

// Scales are in seconds; a scale s probes frequency C / s Hz.
struct ScaleGrid {
  std::vector<double> scales;
  double sampling_rate = 30.0;

  void validate() const;
  std::size_t size() const { return scales.size(); }
  double frequency(std::size_t k, const MorletParams& morlet) const;

  // Geometric spacing of wavelet center frequencies from f_max down to f_min,
  // which yields strictly increasing scales.
  static ScaleGrid from_frequency_band(double f_min, double f_max, std::size_t count,
                                       double sampling_rate, const MorletParams& morlet);
  // 32 scales covering 0.1-15 Hz at 30 samples/s.
  static ScaleGrid default_grid(const MorletParams& morlet = {});
};

std::complex<double> morlet_sample(double t, const MorletParams& params);

struct ComplexMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> data;

  std::complex<double> operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Envelope cut-off relative to its peak; the kernel is zero beyond it.
inline constexpr double kSupportCutoff = 1e-8;

// Precomputed truncated kernels for one (grid, wavelet, signal length)
// triple. Immutable after construction, so one plan can serve many threads.
class CwtPlan {
 public:
  CwtPlan(ScaleGrid grid, MorletParams morlet, std::size_t length);

  const ScaleGrid& grid() const { return grid_; }
  const MorletParams& morlet() const { return morlet_; }
  std::size_t length() const { return length_; }
  std::size_t scales() const { return grid_.size(); }
  // Kernel half-width in samples for scale k (clipped to length - 1).
  std::size_t half_width(std::size_t k) const { return half_width_[k]; }

  ComplexMatrix transform(std::span<const double> signal) const;
  // Writes |coefficient| into out[S * T].
  void magnitudes(std::span<const double> signal, std::span<double> out) const;

 private:
  void check_signal(std::span<const double> signal) const;

  ScaleGrid grid_;
  MorletParams morlet_;
  std::size_t length_;
  std::vector<std::size_t> half_width_;
  std::vector<std::vector<double>> kernel_re_;
  std::vector<std::vector<double>> kernel_im_;
};

// Row k, column n approximates the transform at scale grid.scales[k] and
// shift n / sampling_rate, with zero extension beyond the signal ends.
ComplexMatrix cwt(std::span<const double> signal, const ScaleGrid& grid, const MorletParams& params);

// F x S x T coefficient magnitudes, feature-major in input row order.
struct Scalogram {
  std::size_t features = 0;
  std::size_t scales = 0;
  std::size_t length = 0;
  std::vector<double> data;
  ScaleGrid grid;
  std::vector<std::string> feature_names;

  double operator()(std::size_t f, std::size_t s, std::size_t t) const {
    return data[(f * scales + s) * length + t];
  }
};

Scalogram scalogram(const SignalMatrix& matrix, const ScaleGrid& grid, const MorletParams& params);
Scalogram scalogram(const SignalMatrix& matrix, const CwtPlan& plan);

}  // namespace tcct::wavelet
