#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpvad/corpus.hpp"
#include "gpvad/features.hpp"
#include "gpvad/postprocess.hpp"
#include "gpvad/util.hpp"

namespace gpvad {

struct EvalReport {
  double f1_macro = 0.0;
  double f1_micro = 0.0;
  std::optional<double> auc;  // absent when no scores were supplied
  double fer = 0.0;
  double event_f1 = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["f1_macro"] = f1_macro;
    j["f1_micro"] = f1_micro;
    if (auc) j["auc"] = *auc; else j["auc"] = nullptr;
    j["fer"] = fer;
    j["event_f1"] = event_f1;
    return j;
  }
};

namespace detail {

struct Confusion {
  // [actual][predicted], classes {0: non-speech, 1: speech}
  std::size_t c[2][2] = {{0, 0}, {0, 0}};

  void add(const std::vector<std::uint8_t>& ref, const std::vector<std::uint8_t>& pred) {
    require(ref.size() == pred.size(), "frame metric: length mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i) ++c[ref[i] ? 1 : 0][pred[i] ? 1 : 0];
  }

  std::size_t total() const { return c[0][0] + c[0][1] + c[1][0] + c[1][1]; }

  // per-class F1 with zero denominators defined as 0
  double class_f1(int k) const {
    const double tp = static_cast<double>(c[k][k]);
    const double fp = static_cast<double>(c[1 - k][k]);
    const double fn = static_cast<double>(c[k][1 - k]);
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
  }
};

}  // namespace detail

// Binary frame task over classes {speech, non-speech}. macro = unweighted
// mean of the two per-class F1; micro = F1 over pooled per-class counts,
// which reduces to accuracy. Returns percentages.
inline std::pair<double, double> frame_f1(const std::vector<std::uint8_t>& reference,
                                          const std::vector<std::uint8_t>& predictions) {
  require(!reference.empty(), "frame_f1: empty input");
  detail::Confusion m;
  m.add(reference, predictions);
  const double macro = 50.0 * (m.class_f1(0) + m.class_f1(1));
  const double micro =
      100.0 * static_cast<double>(m.c[0][0] + m.c[1][1]) / static_cast<double>(m.total());
  return {macro, micro};
}

inline double frame_fer(const std::vector<std::uint8_t>& reference,
                        const std::vector<std::uint8_t>& predictions) {
  require(!reference.empty(), "frame_fer: empty input");
  require(reference.size() == predictions.size(), "frame_fer: length mismatch");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if ((reference[i] != 0) != (predictions[i] != 0)) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(reference.size());
}

// ROC AUC via the Mann-Whitney rank statistic; ties contribute 1/2.
// Throws std::domain_error when the reference has a single class.
inline double frame_auc(const std::vector<std::uint8_t>& reference,
                        const std::vector<float>& scores) {
  require(reference.size() == scores.size() && !reference.empty(),
          "frame_auc: bad input sizes");
  std::size_t pos = 0;
  for (auto r : reference) pos += r ? 1 : 0;
  const std::size_t neg = reference.size() - pos;
  if (pos == 0 || neg == 0)
    throw std::domain_error("frame_auc: reference contains a single class");

  std::vector<std::size_t> order(reference.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // average ranks over tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (reference[order[k]]) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
  return 100.0 * u / (static_cast<double>(pos) * static_cast<double>(neg));
}

// Compatibility rule for event matching: onsets within the collar, offsets
// within max(collar, dur_tolerance * reference duration).
inline bool segments_compatible(const SpeechSegment& ref, const SpeechSegment& pred,
                                double collar_s, double dur_tolerance) {
  if (std::abs(pred.onset_s - ref.onset_s) > collar_s) return false;
  const double off_tol = std::max(collar_s, dur_tolerance * (ref.offset_s - ref.onset_s));
  return std::abs(pred.offset_s - ref.offset_s) <= off_tol;
}

struct EventCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Greedy one-to-one matching in ascending reference-onset order; each
// reference takes the earliest-onset unmatched compatible prediction.
inline EventCounts event_match_greedy(std::vector<SpeechSegment> reference,
                                      std::vector<SpeechSegment> predicted,
                                      double collar_s = 0.2,
                                      double dur_tolerance = 0.2) {
  auto by_onset = [](const SpeechSegment& a, const SpeechSegment& b) {
    return a.onset_s < b.onset_s;
  };
  std::sort(reference.begin(), reference.end(), by_onset);
  std::sort(predicted.begin(), predicted.end(), by_onset);
  std::vector<bool> used(predicted.size(), false);
  EventCounts c;
  for (const auto& r : reference) {
    bool matched = false;
    for (std::size_t j = 0; j < predicted.size(); ++j) {
      if (used[j]) continue;
      if (segments_compatible(r, predicted[j], collar_s, dur_tolerance)) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (matched) ++c.tp; else ++c.fn;
  }
  c.fp = predicted.size() - c.tp;
  return c;
}

inline double f1_from_counts(const EventCounts& c) {
  const double denom = 2.0 * c.tp + c.fp + c.fn;
  return denom == 0.0 ? 100.0 : 100.0 * 2.0 * c.tp / denom;
}

inline double event_f1(const std::vector<SpeechSegment>& reference,
                       const std::vector<SpeechSegment>& predicted,
                       double collar_s = 0.2, double dur_tolerance = 0.2) {
  return f1_from_counts(event_match_greedy(reference, predicted, collar_s, dur_tolerance));
}

// ---- corpus-level evaluation ----

struct ClipEvalInput {
  std::vector<SpeechSegment> reference;
  std::vector<SpeechSegment> predicted;
  std::vector<float> scores;  // per-frame speech probabilities, may be empty
  std::size_t frames = 0;
};

// Frame metrics pooled over all clips' concatenated frames; Event-F1 from
// corpus-wide TP/FP/FN. Clips without predictions score as silence.
inline EvalReport evaluate_clips(const std::map<std::string, ClipEvalInput>& clips,
                                 double frame_hop_s, double collar_s = 0.2,
                                 double dur_tolerance = 0.2) {
  require(!clips.empty(), "evaluate: no clips");
  detail::Confusion conf;
  std::vector<std::uint8_t> all_ref;
  std::vector<float> all_scores;
  bool have_scores = true;
  EventCounts events;
  for (const auto& [id, c] : clips) {
    require(c.frames >= 1, "evaluate: clip with no frames: " + id);
    const auto ref = segments_to_binary(c.reference, c.frames, frame_hop_s);
    const auto pred = segments_to_binary(c.predicted, c.frames, frame_hop_s);
    conf.add(ref, pred);
    if (c.scores.size() == c.frames) {
      all_ref.insert(all_ref.end(), ref.begin(), ref.end());
      all_scores.insert(all_scores.end(), c.scores.begin(), c.scores.end());
    } else {
      have_scores = false;
    }
    const auto cnt = event_match_greedy(c.reference, c.predicted, collar_s, dur_tolerance);
    events.tp += cnt.tp;
    events.fp += cnt.fp;
    events.fn += cnt.fn;
  }
  EvalReport r;
  r.f1_macro = 50.0 * (conf.class_f1(0) + conf.class_f1(1));
  const double correct = static_cast<double>(conf.c[0][0] + conf.c[1][1]);
  r.f1_micro = 100.0 * correct / static_cast<double>(conf.total());
  r.fer = 100.0 * (static_cast<double>(conf.total()) - correct) /
          static_cast<double>(conf.total());
  if (have_scores && !all_ref.empty()) {
    bool both = false;
    std::size_t pos = 0;
    for (auto v : all_ref) pos += v;
    both = pos > 0 && pos < all_ref.size();
    if (both) r.auc = frame_auc(all_ref, all_scores);
  }
  r.event_f1 = f1_from_counts(events);
  return r;
}

}  // namespace gpvad
