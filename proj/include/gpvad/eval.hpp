#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpvad/corpus.hpp"
#include "gpvad/metrics.hpp"
#include "gpvad/postprocess.hpp"

namespace gpvad {

// Per-frame speech score dump: TSV clip_id / frame / score.
inline void write_scores(const std::string& path,
                         const std::map<std::string, std::vector<float>>& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scores: " + path);
  out << "clip_id\tframe\tscore\n";
  for (const auto& [id, col] : scores)
    for (std::size_t t = 0; t < col.size(); ++t)
      out << id << '\t' << t << '\t' << format_fixed(col[t], 6) << '\n';
}

inline std::map<std::string, std::vector<float>> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scores: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "clip_id\tframe\tscore")
    throw DataError("bad scores header in " + path);
  std::map<std::string, std::vector<float>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 3)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
    auto& col = out[f[0]];
    const auto frame = static_cast<std::size_t>(std::stoull(f[1]));
    if (frame != col.size())
      throw DataError(path + ":" + std::to_string(lineno) + ": frames out of order");
    col.push_back(std::stof(f[2]));
  }
  return out;
}

// Predictions use the same TSV schema as reference annotations with the
// label fixed to Speech.
inline void write_predictions(const std::string& path,
                              const std::map<std::string, std::vector<SpeechSegment>>& preds) {
  std::vector<FrameAnnotation> rows;
  for (const auto& [id, segs] : preds)
    for (const auto& s : segs) rows.push_back({id, s.onset_s, s.offset_s, "Speech"});
  write_annotations(path, rows);
}

// Frame metrics pooled over the corpus; clips present in the reference but
// absent from the predictions are scored as silence (with a warning).
inline EvalReport evaluate_files(const std::string& reference_tsv,
                                 const std::string& prediction_tsv,
                                 const std::optional<std::string>& scores_tsv,
                                 double frame_hop_s = 0.020,
                                 std::ostream& warnings = std::cerr) {
  const auto ref_rows = read_annotations(reference_tsv);
  const auto pred_rows = read_annotations(prediction_tsv);
  std::map<std::string, std::vector<float>> scores;
  if (scores_tsv) scores = read_scores(*scores_tsv);

  std::map<std::string, ClipEvalInput> clips;
  for (const auto& a : ref_rows) {
    auto& c = clips[a.clip_id];
    if (a.event_label == "Speech") c.reference.push_back({a.onset_s, a.offset_s});
    c.frames = std::max(c.frames, static_cast<std::size_t>(
                                      std::ceil(a.offset_s / frame_hop_s - 1e-9)));
  }
  for (const auto& a : pred_rows) {
    auto it = clips.find(a.clip_id);
    if (it == clips.end())
      throw DataError("predicted clip not in reference: " + a.clip_id);
    if (a.event_label == "Speech")
      it->second.predicted.push_back({a.onset_s, a.offset_s});
  }
  std::set<std::string> predicted_ids;
  for (const auto& a : pred_rows) predicted_ids.insert(a.clip_id);
  for (auto& [id, c] : clips) {
    auto sit = scores.find(id);
    if (sit != scores.end()) {
      c.scores = sit->second;
      c.frames = std::max(c.frames, c.scores.size());
    }
    if (!predicted_ids.count(id))
      warnings << "warning: no prediction rows for clip " << id
               << "; scoring as non-speech\n";
  }
  return evaluate_clips(clips, frame_hop_s);
}

// Table 2 style five-metric table with 2-decimal rendering.
inline std::string render_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::ostringstream os;
  os << "Model\tF1-macro(%)\tF1-micro(%)\tAUC(%)\tFER(%)\tEvent-F1(%)\n";
  for (const auto& [name, r] : rows) {
    os << name << '\t' << format_fixed(r.f1_macro, 2) << '\t'
       << format_fixed(r.f1_micro, 2) << '\t'
       << (r.auc ? format_fixed(*r.auc, 2) : std::string("n/a")) << '\t'
       << format_fixed(r.fer, 2) << '\t' << format_fixed(r.event_f1, 2) << '\n';
  }
  return os.str();
}

}  // namespace gpvad
