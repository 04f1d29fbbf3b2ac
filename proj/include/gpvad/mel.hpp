#pragma once

#include <cmath>

#include "gpvad/stft.hpp"
#include "gpvad/tensor.hpp"

namespace gpvad {

// HTK mel scale.
inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters on the mel scale, peak 1.0, unnormalized.
// Throws std::runtime_error if any filter covers no FFT bin.
inline Tensor<float> mel_filterbank(const StftConfig& cfg, int sample_rate) {
  cfg.validate(sample_rate);
  const int bins = cfg.bins();
  const int bands = cfg.mel_bands;
  const double fmax = cfg.fmax_hz > 0.0 ? cfg.fmax_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(fmax);

  std::vector<double> edges(static_cast<std::size_t>(bands) + 2);
  for (int i = 0; i < bands + 2; ++i)
    edges[static_cast<std::size_t>(i)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (bands + 1));

  Tensor<float> fb({static_cast<std::size_t>(bands), static_cast<std::size_t>(bins)});
  for (int b = 0; b < bands; ++b) {
    const double fl = edges[static_cast<std::size_t>(b)];
    const double fc = edges[static_cast<std::size_t>(b) + 1];
    const double fr = edges[static_cast<std::size_t>(b) + 2];
    bool nonzero = false;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / cfg.n_fft;
      const double up = (f - fl) / (fc - fl);
      const double down = (fr - f) / (fr - fc);
      const double wgt = std::max(0.0, std::min(up, down));
      fb.at(static_cast<std::size_t>(b), static_cast<std::size_t>(k)) =
          static_cast<float>(wgt);
      if (wgt > 0.0) nonzero = true;
    }
    if (!nonzero)
      throw std::runtime_error(
          "mel_filterbank: band " + std::to_string(b) +
          " covers no FFT bin; too many bands for this resolution");
  }
  return fb;
}

// Center frequency (peak) of one band, for tests and diagnostics.
inline double mel_band_center_hz(const StftConfig& cfg, int sample_rate, int band) {
  const double fmax = cfg.fmax_hz > 0.0 ? cfg.fmax_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(fmax);
  return mel_to_hz(mel_lo + (mel_hi - mel_lo) * (band + 1) / (cfg.mel_bands + 1));
}

}  // namespace gpvad
