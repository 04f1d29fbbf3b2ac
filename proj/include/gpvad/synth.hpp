#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gpvad/fft.hpp"
#include "gpvad/util.hpp"
#include "gpvad/wave.hpp"

namespace gpvad {

struct Interval {
  double onset_s = 0.0;
  double offset_s = 0.0;
};

enum class NoiseKind { white, pink, tone_burst, amplitude_burst };

inline const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::white: return "white";
    case NoiseKind::pink: return "pink";
    case NoiseKind::tone_burst: return "tone_burst";
    case NoiseKind::amplitude_burst: return "amplitude_burst";
  }
  throw std::invalid_argument("unknown noise kind");
}

inline NoiseKind noise_kind_from_name(const std::string& name) {
  if (name == "white") return NoiseKind::white;
  if (name == "pink") return NoiseKind::pink;
  if (name == "tone_burst") return NoiseKind::tone_burst;
  if (name == "amplitude_burst") return NoiseKind::amplitude_burst;
  throw std::invalid_argument("unknown noise kind: " + name);
}

struct SpeechSynthesis {
  Waveform waveform;
  std::vector<Interval> intervals;  // active (onset, offset) in seconds
  std::vector<float> envelope;      // synthesis gain; > 0 exactly on active samples
};

namespace detail {

// Burst/gap layout shared by speech and the burst-style noise kinds.
// Gain is strictly positive inside a burst (linear attack from the first
// sample, never reaching zero until the burst ends).
struct Burst {
  std::size_t start = 0;
  std::size_t length = 0;
  double f0 = 0.0;
};

inline std::vector<Burst> draw_bursts(std::mt19937& rng, std::size_t total,
                                      int sample_rate, double f_lo, double f_hi,
                                      double gap_lo_s, double gap_hi_s,
                                      double burst_lo_s, double burst_hi_s) {
  std::uniform_real_distribution<double> gap(gap_lo_s, gap_hi_s);
  std::uniform_real_distribution<double> len(burst_lo_s, burst_hi_s);
  std::uniform_real_distribution<double> freq(f_lo, f_hi);
  std::vector<Burst> out;
  std::size_t pos = static_cast<std::size_t>(gap(rng) * sample_rate * 0.5);
  while (pos < total) {
    Burst b;
    b.start = pos;
    b.length = std::min<std::size_t>(
        static_cast<std::size_t>(len(rng) * sample_rate), total - pos);
    b.f0 = freq(rng);
    if (b.length > 0) out.push_back(b);
    pos = b.start + b.length + static_cast<std::size_t>(gap(rng) * sample_rate);
  }
  return out;
}

}  // namespace detail

// Toy speech: segments of a multi-harmonic tone (fundamental 100-300 Hz,
// 3 harmonics, 4 Hz amplitude modulation) separated by silence.
inline SpeechSynthesis synth_speech(double duration_s, std::uint64_t seed,
                                    int sample_rate = kSampleRate) {
  require(duration_s > 0.0, "synth_speech: duration must be positive");
  const auto total = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  require(total >= 1, "synth_speech: duration too short for one sample");

  std::mt19937 rng = make_rng(seed, 0x5eec);
  auto bursts = detail::draw_bursts(rng, total, sample_rate, 100.0, 300.0,
                                    0.3, 1.2, 0.5, 2.0);

  SpeechSynthesis out;
  out.waveform.sample_rate = sample_rate;
  out.waveform.samples.assign(total, 0.0f);
  out.envelope.assign(total, 0.0f);

  const double two_pi = 2.0 * 3.14159265358979323846;
  const std::size_t ramp = static_cast<std::size_t>(0.010 * sample_rate);
  const double harm_amp[3] = {1.0, 0.5, 0.25};

  for (const auto& b : bursts) {
    for (std::size_t i = 0; i < b.length; ++i) {
      const std::size_t n = b.start + i;
      const double t = static_cast<double>(i) / sample_rate;
      // attack/release ramps; first and last sample stay strictly positive
      double g = 1.0;
      if (i < ramp) g = static_cast<double>(i + 1) / static_cast<double>(ramp);
      const std::size_t from_end = b.length - 1 - i;
      if (from_end < ramp)
        g = std::min(g, static_cast<double>(from_end + 1) / static_cast<double>(ramp));
      const double am = 0.6 + 0.4 * std::sin(two_pi * 4.0 * t);
      const double gain = 0.3 * g * am;
      double s = 0.0;
      for (int h = 0; h < 3; ++h)
        s += harm_amp[h] * std::sin(two_pi * b.f0 * (h + 1) * t);
      out.waveform.samples[n] = static_cast<float>(gain * s / 1.75);
      out.envelope[n] = static_cast<float>(gain);
    }
    out.intervals.push_back(
        {static_cast<double>(b.start) / sample_rate,
         static_cast<double>(b.start + b.length) / sample_rate});
  }
  return out;
}

namespace detail {

// Exact 1/f power spectrum via frequency-domain synthesis: random phases,
// magnitude proportional to 1/sqrt(f), inverse FFT, truncate.
inline std::vector<float> pink_noise(std::size_t total, std::mt19937& rng) {
  const std::size_t n = next_pow2(std::max<std::size_t>(total, 2));
  std::vector<std::complex<double>> spec(n, {0.0, 0.0});
  std::uniform_real_distribution<double> phase(0.0, 2.0 * 3.14159265358979323846);
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double mag = 1.0 / std::sqrt(static_cast<double>(k));
    const double ph = phase(rng);
    spec[k] = std::polar(mag, ph);
    if (k < n / 2) spec[n - k] = std::conj(spec[k]);
    else spec[k] = {mag, 0.0};  // Nyquist bin must be real
  }
  fft_inplace(spec, /*inverse=*/true);
  std::vector<float> out(total);
  double acc = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    out[i] = static_cast<float>(spec[i].real());
    acc += spec[i].real() * spec[i].real();
  }
  const double scale = 0.1 / std::max(1e-12, std::sqrt(acc / total));
  for (auto& v : out) v = static_cast<float>(v * scale);
  return out;
}

}  // namespace detail

// Deterministic for a fixed (kind, seed). tone_burst fundamentals are
// >= 1 kHz so toy speech and noise stay spectrally separable.
inline Waveform synth_noise(double duration_s, NoiseKind kind, std::uint64_t seed,
                            int sample_rate = kSampleRate) {
  require(duration_s > 0.0, "synth_noise: duration must be positive");
  const auto total = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  require(total >= 1, "synth_noise: duration too short for one sample");

  std::mt19937 rng = make_rng(seed, 0xa01 + static_cast<std::uint64_t>(kind));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(total, 0.0f);

  const double two_pi = 2.0 * 3.14159265358979323846;
  switch (kind) {
    case NoiseKind::white: {
      std::normal_distribution<double> g(0.0, 0.1);
      for (auto& v : w.samples) v = static_cast<float>(g(rng));
      break;
    }
    case NoiseKind::pink: {
      w.samples = detail::pink_noise(total, rng);
      break;
    }
    case NoiseKind::tone_burst: {
      auto bursts = detail::draw_bursts(rng, total, sample_rate, 1000.0, 3000.0,
                                        0.2, 0.8, 0.2, 1.0);
      for (const auto& b : bursts) {
        std::size_t ramp = static_cast<std::size_t>(0.005 * sample_rate);
        for (std::size_t i = 0; i < b.length; ++i) {
          const double t = static_cast<double>(i) / sample_rate;
          double g = 1.0;
          if (i < ramp) g = static_cast<double>(i + 1) / ramp;
          const std::size_t from_end = b.length - 1 - i;
          if (from_end < ramp) g = std::min(g, static_cast<double>(from_end + 1) / ramp);
          const double s = std::sin(two_pi * b.f0 * t) +
                           0.5 * std::sin(two_pi * 2.0 * b.f0 * t);
          w.samples[b.start + i] = static_cast<float>(0.15 * g * s / 1.5);
        }
      }
      break;
    }
    case NoiseKind::amplitude_burst: {
      auto bursts = detail::draw_bursts(rng, total, sample_rate, 0.1, 0.5,
                                        0.05, 0.4, 0.05, 0.3);
      std::normal_distribution<double> g(0.0, 0.15);
      for (const auto& b : bursts) {
        for (std::size_t i = 0; i < b.length; ++i)
          w.samples[b.start + i] = static_cast<float>(g(rng));
      }
      break;
    }
    default:
      throw std::invalid_argument("synth_noise: unknown kind");
  }
  return w;
}

struct MixResult {
  Waveform mixture;
  double gain = 0.0;          // applied to the noise component
  double clip_fraction = 0.0; // fraction of samples hard-clipped to [-1, 1]
};

// x = s + g*u with g = (RMS(s)/RMS(u)) * 10^(-snr_db/20); noise truncated
// to the speech length.
inline MixResult mix_at_snr(const Waveform& speech, const Waveform& noise,
                            double snr_db) {
  require(std::isfinite(snr_db), "mix_at_snr: snr_db must be finite");
  require(speech.sample_rate == noise.sample_rate,
          "mix_at_snr: sample-rate mismatch");
  require(noise.samples.size() >= speech.samples.size(),
          "mix_at_snr: noise shorter than speech");
  const double rs = rms(speech.samples);
  std::vector<float> trunc(noise.samples.begin(),
                           noise.samples.begin() +
                               static_cast<std::ptrdiff_t>(speech.samples.size()));
  const double ru = rms(trunc);
  if (rs <= 0.0 || ru <= 0.0)
    throw std::domain_error("mix_at_snr: degenerate zero-RMS signal");

  MixResult out;
  out.gain = (rs / ru) * std::pow(10.0, -snr_db / 20.0);
  out.mixture.sample_rate = speech.sample_rate;
  out.mixture.samples.resize(speech.samples.size());
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < speech.samples.size(); ++i) {
    double v = static_cast<double>(speech.samples[i]) + out.gain * trunc[i];
    if (v > 1.0) { v = 1.0; ++clipped; }
    if (v < -1.0) { v = -1.0; ++clipped; }
    out.mixture.samples[i] = static_cast<float>(v);
  }
  out.clip_fraction = static_cast<double>(clipped) / speech.samples.size();
  return out;
}

}  // namespace gpvad
