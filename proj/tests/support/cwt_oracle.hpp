#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "tcct/wavelet.hpp"

namespace tcct::testing {

// Direct discretization of W(s, tau_n) = s^-1/2 sum_m x_m conj(psi((t_m - tau_n) / s)) dt
// over every sample, with its own copy of the mother wavelet.
inline std::vector<std::complex<double>> riemann_cwt(const std::vector<double>& x,
                                                     const wavelet::ScaleGrid& grid, double bw,
                                                     double cf) {
  const double fs = grid.sampling_rate, dt = 1.0 / fs;
  const std::size_t t_len = x.size(), s_len = grid.scales.size();
  auto psi = [&](double t) {
    const double pi = std::numbers::pi;
    return std::exp(-t * t / bw) / std::sqrt(pi * bw) *
           std::complex<double>(std::cos(2 * pi * cf * t), std::sin(2 * pi * cf * t));
  };
  std::vector<std::complex<double>> out(s_len * t_len);
  for (std::size_t k = 0; k < s_len; ++k) {
    const double s = grid.scales[k];
    for (std::size_t n = 0; n < t_len; ++n) {
      std::complex<double> acc = 0.0;
      for (std::size_t m = 0; m < t_len; ++m) {
        const double u = (static_cast<double>(m) - static_cast<double>(n)) * dt / s;
        acc += x[m] * std::conj(psi(u));
      }
      out[k * t_len + n] = acc * dt / std::sqrt(s);
    }
  }
  return out;
}

// Largest coefficient error relative to the largest oracle magnitude.
inline double normwise_error(const wavelet::ComplexMatrix& got,
                             const std::vector<std::complex<double>>& want) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    err = std::max(err, std::abs(got.data[i] - want[i]));
    scale = std::max(scale, std::abs(want[i]));
  }
  return err / scale;
}

// For B, C the magnitude sqrt(s) exp(-pi^2 B (s f - C)^2) peaks at
// s f = (C + sqrt(C^2 + 1 / (pi^2 B))) / 2.
inline double predicted_peak_scale(double f0, const wavelet::MorletParams& p) {
  const double pi = std::numbers::pi;
  const double c = p.center_frequency;
  return (c + std::sqrt(c * c + 1.0 / (pi * pi * p.bandwidth))) / 2.0 / f0;
}

struct PeakResult {
  double found_scale;
  double predicted_scale;
  double log_step;
  bool ok() const { return std::abs(std::log(found_scale) - std::log(predicted_scale)) <= log_step; }
};

// Scale of the largest time-averaged |W| over the default 32-scale grid for a
// 280-sample cosine.
inline PeakResult cosine_peak(double f0, const wavelet::MorletParams& p = {}) {
  const auto grid = wavelet::ScaleGrid::default_grid(p);
  const wavelet::CwtPlan plan(grid, p, 280);
  std::vector<double> x(280);
  for (std::size_t t = 0; t < 280; ++t) {
    x[t] = std::cos(2 * std::numbers::pi * f0 * static_cast<double>(t) / grid.sampling_rate);
  }
  std::vector<double> mag(grid.size() * 280);
  plan.magnitudes(x, mag);
  std::vector<double> mean(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t t = 0; t < 280; ++t) mean[k] += mag[k * 280 + t] / 280.0;
  }
  const auto best = static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin());
  return {grid.scales[best], predicted_peak_scale(f0, p), std::log(grid.scales[1] / grid.scales[0])};
}

}  // namespace tcct::testing
