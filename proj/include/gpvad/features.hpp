#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gpvad/mel.hpp"
#include "gpvad/stft.hpp"
#include "gpvad/tensor.hpp"
#include "gpvad/wave.hpp"

namespace gpvad {

constexpr double kLogFloor = 1e-10;

struct FeatureMatrix {
  Tensor<float> values;  // T x mel_bands, natural-log power
  double frame_hop_s = 0.020;
  std::string clip_id;

  std::size_t frames() const { return values.dim(0); }
  std::size_t bands() const { return values.dim(1); }
};

// log(max(mel * power, floor))
inline FeatureMatrix extract_logmel(const Waveform& w, const StftConfig& cfg,
                                    const std::string& clip_id = {}) {
  const Tensor<float> power = stft_power(w, cfg);
  const Tensor<float> fb = mel_filterbank(cfg, w.sample_rate);
  const std::size_t T = power.dim(0);
  const std::size_t bins = power.dim(1);
  const std::size_t bands = fb.dim(0);

  FeatureMatrix out;
  out.clip_id = clip_id;
  out.frame_hop_s = cfg.hop_s;
  out.values = Tensor<float>({T, bands});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < bands; ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < bins; ++k)
        acc += static_cast<double>(fb.at(b, k)) * power.at(t, k);
      out.values.at(t, b) = static_cast<float>(std::log(std::max(acc, kLogFloor)));
    }
  }
  return out;
}

// ---- feature archive: one binary file per clip + a TSV index ----

namespace detail {
constexpr char kFeatMagic[8] = {'G', 'P', 'V', 'F', 'E', 'A', 'T', '1'};
}

inline void write_feature_file(const std::string& path, const FeatureMatrix& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  out.write(detail::kFeatMagic, 8);
  const std::uint32_t id_len = static_cast<std::uint32_t>(f.clip_id.size());
  const std::uint32_t T = static_cast<std::uint32_t>(f.frames());
  const std::uint32_t F = static_cast<std::uint32_t>(f.bands());
  const double hop = f.frame_hop_s;
  out.write(reinterpret_cast<const char*>(&id_len), 4);
  out.write(f.clip_id.data(), id_len);
  out.write(reinterpret_cast<const char*>(&T), 4);
  out.write(reinterpret_cast<const char*>(&F), 4);
  out.write(reinterpret_cast<const char*>(&hop), 8);
  out.write(reinterpret_cast<const char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(float)));
  if (!out) throw std::runtime_error("feature write failed: " + path);
}

inline FeatureMatrix read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kFeatMagic, 8) != 0)
    throw DataError("bad feature file magic: " + path);
  std::uint32_t id_len = 0, T = 0, F = 0;
  double hop = 0.0;
  in.read(reinterpret_cast<char*>(&id_len), 4);
  if (!in || id_len > 4096) throw DataError("bad feature header: " + path);
  std::string id(id_len, '\0');
  in.read(id.data(), id_len);
  in.read(reinterpret_cast<char*>(&T), 4);
  in.read(reinterpret_cast<char*>(&F), 4);
  in.read(reinterpret_cast<char*>(&hop), 8);
  if (!in || T == 0 || F == 0) throw DataError("bad feature header: " + path);
  FeatureMatrix f;
  f.clip_id = std::move(id);
  f.frame_hop_s = hop;
  f.values = Tensor<float>({T, F});
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(float)));
  if (!in) throw DataError("truncated feature file: " + path);
  return f;
}

struct FeatureIndexRow {
  std::string clip_id;
  std::string feature_path;
  std::size_t num_frames = 0;
};

inline void write_feature_index(const std::string& path,
                                const std::vector<FeatureIndexRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature index: " + path);
  out << "clip_id\tfeature_path\tnum_frames\n";
  for (const auto& r : rows)
    out << r.clip_id << '\t' << r.feature_path << '\t' << r.num_frames << '\n';
}

inline std::vector<FeatureIndexRow> read_feature_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature index: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "clip_id\tfeature_path\tnum_frames")
    throw DataError("bad feature index header: " + path);
  std::vector<FeatureIndexRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_fields(line, '\t');
    if (f.size() != 3) throw DataError("bad feature index row in " + path);
    rows.push_back({f[0], f[1], static_cast<std::size_t>(std::stoull(f[2]))});
  }
  return rows;
}

}  // namespace gpvad
