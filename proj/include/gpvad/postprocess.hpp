#pragma once

#include <string>
#include <vector>

#include "gpvad/model.hpp"
#include "gpvad/util.hpp"

namespace gpvad {

struct SpeechSegment {
  double onset_s = 0.0;
  double offset_s = 0.0;
};

struct ThresholdConfig {
  double phi_low = 0.1;
  double phi_hi = 0.5;
  double min_duration_s = 0.0;  // optional filter, off by default
  double merge_gap_s = 0.0;     // optional filter, off by default

  void validate() const {
    require(phi_low >= 0.0 && phi_low <= phi_hi && phi_hi <= 1.0,
            "thresholds must satisfy 0 <= phi_low <= phi_hi <= 1");
    require(min_duration_s >= 0.0 && merge_gap_s >= 0.0,
            "duration filters must be non-negative");
  }
};

// Hysteresis: a frame is active iff it lies in a maximal run of frames with
// p >= phi_low that contains at least one frame with p >= phi_hi.
inline std::vector<std::uint8_t> double_threshold(const std::vector<float>& probs,
                                                  const ThresholdConfig& cfg) {
  cfg.validate();
  std::vector<std::uint8_t> out(probs.size(), 0);
  std::size_t i = 0;
  while (i < probs.size()) {
    if (probs[i] < cfg.phi_low) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool seeded = false;
    while (j < probs.size() && probs[j] >= cfg.phi_low) {
      if (probs[j] >= cfg.phi_hi) seeded = true;
      ++j;
    }
    if (seeded)
      for (std::size_t k = i; k < j; ++k) out[k] = 1;
    i = j;
  }
  return out;
}

// Each maximal run [i, j] becomes (i*hop, (j+1)*hop).
inline std::vector<SpeechSegment> binary_to_segments(
    const std::vector<std::uint8_t>& binary, double frame_hop_s) {
  require(frame_hop_s > 0.0, "frame hop must be positive");
  std::vector<SpeechSegment> out;
  std::size_t i = 0;
  while (i < binary.size()) {
    if (!binary[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < binary.size() && binary[j]) ++j;
    out.push_back({static_cast<double>(i) * frame_hop_s,
                   static_cast<double>(j) * frame_hop_s});
    i = j;
  }
  return out;
}

inline std::vector<std::uint8_t> segments_to_binary(
    const std::vector<SpeechSegment>& segments, std::size_t frames,
    double frame_hop_s) {
  std::vector<std::uint8_t> out(frames, 0);
  for (const auto& s : segments) {
    const auto lo = static_cast<std::size_t>(
        std::max(0.0, std::floor(s.onset_s / frame_hop_s + 1e-9)));
    const auto hi = static_cast<std::size_t>(
        std::max(0.0, std::ceil(s.offset_s / frame_hop_s - 1e-9)));
    for (std::size_t i = lo; i < std::min(frames, hi); ++i) out[i] = 1;
  }
  return out;
}

// Thresholds the Speech column only; every other event column is discarded.
inline std::vector<SpeechSegment> extract_speech(const ProbSequence& probs,
                                                 const ThresholdConfig& cfg) {
  cfg.validate();
  const std::size_t T = probs.values.dim(0);
  require(probs.vocabulary.speech_index < probs.values.dim(1),
          "probability sequence lacks a Speech column");
  std::vector<float> col(T);
  for (std::size_t t = 0; t < T; ++t)
    col[t] = probs.values.at(t, probs.vocabulary.speech_index);
  auto binary = double_threshold(col, cfg);
  auto segs = binary_to_segments(binary, probs.frame_hop_s);

  if (cfg.merge_gap_s > 0.0 && segs.size() > 1) {
    std::vector<SpeechSegment> merged{segs.front()};
    for (std::size_t i = 1; i < segs.size(); ++i) {
      if (segs[i].onset_s - merged.back().offset_s <= cfg.merge_gap_s)
        merged.back().offset_s = segs[i].offset_s;
      else
        merged.push_back(segs[i]);
    }
    segs = std::move(merged);
  }
  if (cfg.min_duration_s > 0.0) {
    std::vector<SpeechSegment> kept;
    for (const auto& s : segs)
      if (s.offset_s - s.onset_s >= cfg.min_duration_s) kept.push_back(s);
    segs = std::move(kept);
  }
  return segs;
}

}  // namespace gpvad
