#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gpvad/synth.hpp"
#include "gpvad/util.hpp"
#include "gpvad/wave.hpp"

namespace gpvad {

struct FrameAnnotation {
  std::string clip_id;
  double onset_s = 0.0;
  double offset_s = 0.0;
  std::string event_label;
};

struct ClipRecord {
  std::string clip_id;
  std::string audio_path;
  std::set<std::string> clip_labels;
  std::vector<FrameAnnotation> frame_annotations;
  int snr_db = 0;
};

struct LabelVocabulary {
  std::vector<std::string> names;
  std::size_t speech_index = 0;

  static LabelVocabulary from_names(std::vector<std::string> names) {
    require(names.size() >= 2, "vocabulary needs at least 2 event names");
    std::set<std::string> uniq(names.begin(), names.end());
    require(uniq.size() == names.size(), "vocabulary names must be unique");
    auto it = std::find(names.begin(), names.end(), "Speech");
    require(it != names.end(), "vocabulary must contain Speech");
    LabelVocabulary v;
    v.speech_index = static_cast<std::size_t>(it - names.begin());
    v.names = std::move(names);
    return v;
  }

  std::size_t size() const { return names.size(); }

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    require(it != names.end(), "unknown event label: " + name);
    return static_cast<std::size_t>(it - names.begin());
  }
};

// ---- manifest / annotation TSV ----

inline void write_manifest(const std::string& path,
                           const std::vector<ClipRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open manifest for write: " + path);
  out << "clip_id\taudio_path\tlabels\tsnr_db\n";
  for (const auto& r : records) {
    std::string labels;
    for (const auto& l : r.clip_labels) {
      if (!labels.empty()) labels += ';';
      labels += l;
    }
    out << r.clip_id << '\t' << r.audio_path << '\t' << labels << '\t'
        << r.snr_db << '\n';
  }
}

inline std::vector<ClipRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "clip_id\taudio_path\tlabels\tsnr_db")
    throw DataError("bad manifest header in " + path);
  std::vector<ClipRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 4)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    ClipRecord r;
    r.clip_id = f[0];
    r.audio_path = f[1];
    for (const auto& l : split_fields(f[2], ';'))
      if (!l.empty()) r.clip_labels.insert(l);
    try {
      r.snr_db = std::stoi(f[3]);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad snr_db");
    }
    out.push_back(std::move(r));
  }
  return out;
}

// DCASE-style segment annotations, times with 3 decimals.
inline void write_annotations(const std::string& path,
                              const std::vector<FrameAnnotation>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open annotations for write: " + path);
  out << "clip_id\tonset\toffset\tevent_label\n";
  for (const auto& a : rows)
    out << a.clip_id << '\t' << format_fixed(a.onset_s, 3) << '\t'
        << format_fixed(a.offset_s, 3) << '\t' << a.event_label << '\n';
}

inline std::vector<FrameAnnotation> read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotations: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "clip_id\tonset\toffset\tevent_label")
    throw DataError("bad annotation header in " + path);
  std::vector<FrameAnnotation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 4)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    FrameAnnotation a;
    a.clip_id = f[0];
    try {
      a.onset_s = std::stod(f[1]);
      a.offset_s = std::stod(f[2]);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad time field");
    }
    a.event_label = f[3];
    if (!(a.onset_s >= 0.0 && a.onset_s < a.offset_s))
      throw DataError(path + ":" + std::to_string(lineno) + ": onset/offset order");
    out.push_back(std::move(a));
  }
  return out;
}

// ---- corpus generation ----

struct CorpusConfig {
  std::size_t num_clips = 200;
  double clip_duration_s = 10.0;
  int snr_lo_db = 5;
  int snr_hi_db = 15;           // inclusive, 1 dB steps
  double speech_fraction = 0.6; // probability a clip contains speech
  double train_ratio = 0.9;
  std::uint64_t seed = 42;
  bool fine_noise_labels = false;  // label noise per kind instead of "Noise"
  std::vector<NoiseKind> noise_kinds = {NoiseKind::white, NoiseKind::pink,
                                        NoiseKind::tone_burst,
                                        NoiseKind::amplitude_burst};
};

struct CorpusSummary {
  std::string train_manifest;
  std::string heldout_manifest;
  std::string annotation_file;
  std::size_t num_clips = 0;
  std::size_t num_speech_clips = 0;
  std::map<std::string, std::size_t> label_counts;
};

namespace detail {

inline ClipRecord synth_clip(const CorpusConfig& cfg, std::size_t index,
                             const std::filesystem::path& wav_dir) {
  const std::uint64_t stream = mix_seed(cfg.seed, index);
  // retry with a fresh substream when mixing clips more than 1% of samples
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    std::mt19937 rng = make_rng(stream, attempt);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool has_speech = unit(rng) < cfg.speech_fraction;
    std::uniform_int_distribution<std::size_t> kind_pick(0, cfg.noise_kinds.size() - 1);
    const NoiseKind kind = cfg.noise_kinds[kind_pick(rng)];
    std::uniform_int_distribution<int> snr_pick(cfg.snr_lo_db, cfg.snr_hi_db);
    const int snr = snr_pick(rng);

    const std::uint64_t noise_seed = mix_seed(stream, 2 * attempt + 1);
    Waveform noise = synth_noise(cfg.clip_duration_s, kind, noise_seed);

    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "clip_%04zu", index);
    ClipRecord rec;
    rec.clip_id = idbuf;
    rec.snr_db = snr;

    const std::string noise_label =
        cfg.fine_noise_labels ? std::string("Noise_") + noise_kind_name(kind)
                              : std::string("Noise");
    Waveform mixture;
    if (has_speech) {
      const std::uint64_t speech_seed = mix_seed(stream, 2 * attempt + 2);
      SpeechSynthesis sp = synth_speech(cfg.clip_duration_s, speech_seed);
      if (sp.intervals.empty()) continue;
      MixResult mix = mix_at_snr(sp.waveform, noise, static_cast<double>(snr));
      if (mix.clip_fraction > 0.01) continue;
      mixture = std::move(mix.mixture);
      rec.clip_labels.insert("Speech");
      for (const auto& iv : sp.intervals)
        rec.frame_annotations.push_back({rec.clip_id, iv.onset_s, iv.offset_s, "Speech"});
    } else {
      mixture = std::move(noise);
    }
    rec.clip_labels.insert(noise_label);
    rec.frame_annotations.push_back(
        {rec.clip_id, 0.0, cfg.clip_duration_s, noise_label});

    const auto wav_path = wav_dir / (rec.clip_id + ".wav");
    write_wav(wav_path.string(), mixture);
    rec.audio_path = wav_path.string();
    return rec;
  }
  throw std::runtime_error("corpus: could not synthesize clip within clip budget");
}

}  // namespace detail

// Label-balanced split: labels processed rarest-first (name as tie-break),
// clips sorted by id within a label, every cycle-th unassigned clip goes to
// the held-out set. Rarest-first keeps minority labels on both sides.
inline void split_records(const std::vector<ClipRecord>& records, double train_ratio,
                          std::vector<ClipRecord>& train,
                          std::vector<ClipRecord>& heldout) {
  require(train_ratio > 0.0 && train_ratio < 1.0, "train_ratio must be in (0,1)");
  const std::size_t cycle =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / (1.0 - train_ratio))));
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (const auto& l : records[i].clip_labels) by_label[l].push_back(i);

  std::vector<std::string> order;
  for (const auto& [label, idxs] : by_label) order.push_back(label);
  std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    if (by_label[a].size() != by_label[b].size())
      return by_label[a].size() < by_label[b].size();
    return a < b;
  });

  std::vector<int> assigned(records.size(), -1);
  for (const auto& label : order) {
    auto& idxs = by_label[label];
    std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
      return records[a].clip_id < records[b].clip_id;
    });
    std::size_t k = 0;
    for (std::size_t i : idxs) {
      if (assigned[i] >= 0) continue;
      assigned[i] = ((k + 1) % cycle == 0) ? 1 : 0;
      ++k;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i)
    (assigned[i] == 1 ? heldout : train).push_back(records[i]);
}

inline CorpusSummary build_corpus(const CorpusConfig& cfg,
                                  const std::string& out_dir) {
  require(cfg.num_clips >= 1, "build_corpus: need at least one clip");
  require(cfg.clip_duration_s > 0.0, "build_corpus: non-positive duration");
  require(cfg.snr_lo_db <= cfg.snr_hi_db, "build_corpus: snr_lo > snr_hi");
  require(!cfg.noise_kinds.empty(), "build_corpus: no noise kinds");

  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  const fs::path wav_dir = root / "wav";
  std::error_code ec;
  fs::create_directories(wav_dir, ec);
  if (ec || !fs::is_directory(wav_dir))
    throw std::runtime_error("build_corpus: cannot create " + wav_dir.string());

  std::vector<ClipRecord> records;
  records.reserve(cfg.num_clips);
  for (std::size_t i = 0; i < cfg.num_clips; ++i)
    records.push_back(detail::synth_clip(cfg, i, wav_dir));

  std::vector<ClipRecord> train, heldout;
  split_records(records, cfg.train_ratio, train, heldout);

  CorpusSummary s;
  s.num_clips = records.size();
  std::vector<FrameAnnotation> all_rows;
  for (const auto& r : records) {
    if (r.clip_labels.count("Speech")) ++s.num_speech_clips;
    for (const auto& l : r.clip_labels) ++s.label_counts[l];
    for (const auto& a : r.frame_annotations) all_rows.push_back(a);
  }
  s.train_manifest = (root / "clips_train.tsv").string();
  s.heldout_manifest = (root / "clips_heldout.tsv").string();
  s.annotation_file = (root / "annotations.tsv").string();
  write_manifest(s.train_manifest, train);
  write_manifest(s.heldout_manifest, heldout);
  write_annotations(s.annotation_file, all_rows);
  return s;
}

inline LabelVocabulary vocabulary_from_manifests(
    const std::vector<const std::vector<ClipRecord>*>& manifests) {
  std::set<std::string> labels;
  for (const auto* m : manifests)
    for (const auto& r : *m)
      for (const auto& l : r.clip_labels) labels.insert(l);
  return LabelVocabulary::from_names({labels.begin(), labels.end()});
}

}  // namespace gpvad
