#pragma once

#include <cmath>
#include <vector>

#include "gpvad/fft.hpp"
#include "gpvad/tensor.hpp"
#include "gpvad/wave.hpp"

namespace gpvad {

struct StftConfig {
  int n_fft = 2048;
  double win_length_s = 0.040;
  double hop_s = 0.020;
  int mel_bands = 64;
  double fmin_hz = 0.0;
  double fmax_hz = 0.0;  // 0 means sample_rate / 2

  int win_samples(int sample_rate) const {
    return static_cast<int>(std::lround(win_length_s * sample_rate));
  }
  int hop_samples(int sample_rate) const {
    return static_cast<int>(std::lround(hop_s * sample_rate));
  }
  int bins() const { return n_fft / 2 + 1; }

  void validate(int sample_rate) const {
    require(n_fft > 0 && (n_fft & (n_fft - 1)) == 0, "n_fft must be a power of two");
    require(win_samples(sample_rate) <= n_fft, "window longer than n_fft");
    require(hop_samples(sample_rate) >= 1 &&
                hop_samples(sample_rate) <= win_samples(sample_rate),
            "hop must be in [1, win_length]");
    double fmax = fmax_hz > 0.0 ? fmax_hz : sample_rate / 2.0;
    require(fmin_hz >= 0.0 && fmin_hz < fmax && fmax <= sample_rate / 2.0,
            "fmin/fmax out of range");
  }
};

namespace detail {

// Reflect extension without edge repetition; a 1-sample signal extends as
// a constant.
inline std::size_t reflect_index(long long i, std::size_t len) {
  if (len == 1) return 0;
  const long long period = 2 * (static_cast<long long>(len) - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(len)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

// Power spectrogram. Frame t is centered at sample t*hop (reflect padding),
// so timestamp t*hop_s lines up with annotation times. T = ceil(len / hop).
inline Tensor<float> stft_power(const Waveform& w, const StftConfig& cfg) {
  cfg.validate(w.sample_rate);
  require(!w.samples.empty(), "stft_power: empty waveform");
  const int win = cfg.win_samples(w.sample_rate);
  const int hop = cfg.hop_samples(w.sample_rate);
  const std::size_t len = w.samples.size();
  const std::size_t frames = (len + hop - 1) / hop;
  const int bins = cfg.bins();

  // periodic Hann
  std::vector<double> window(win);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (int n = 0; n < win; ++n)
    window[n] = 0.5 * (1.0 - std::cos(two_pi * n / win));

  Tensor<float> out({frames, static_cast<std::size_t>(bins)});
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.n_fft));
  for (std::size_t t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t) * hop - win / 2;
    for (int n = 0; n < win; ++n) {
      const std::size_t src = detail::reflect_index(start + n, len);
      buf[static_cast<std::size_t>(n)] = window[n] * static_cast<double>(w.samples[src]);
    }
    for (int n = win; n < cfg.n_fft; ++n) buf[static_cast<std::size_t>(n)] = 0.0;
    fft_inplace(buf);
    for (int k = 0; k < bins; ++k)
      out.at(t, static_cast<std::size_t>(k)) = static_cast<float>(std::norm(buf[static_cast<std::size_t>(k)]));
  }
  return out;
}

}  // namespace gpvad
