#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gpvad/util.hpp"

namespace gpvad {

constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// PCM 16-bit signed little-endian, mono.
inline void write_wav(const std::string& path, const Waveform& w) {
  require(!w.samples.empty(), "write_wav: empty waveform");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  const std::uint32_t sr = static_cast<std::uint32_t>(w.sample_rate);
  std::string buf;
  buf.reserve(44 + data_bytes);
  buf += "RIFF";
  detail::put_u32(buf, 36 + data_bytes);
  buf += "WAVEfmt ";
  detail::put_u32(buf, 16);
  detail::put_u16(buf, 1);   // PCM
  detail::put_u16(buf, 1);   // mono
  detail::put_u32(buf, sr);
  detail::put_u32(buf, sr * 2);
  detail::put_u16(buf, 2);
  detail::put_u16(buf, 16);
  buf += "data";
  detail::put_u32(buf, data_bytes);
  for (float s : w.samples) {
    float c = std::min(1.0f, std::max(-1.0f, s));
    auto q = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    detail::put_u16(buf, static_cast<std::uint16_t>(q));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write_wav: write failed for " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_wav: cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("read_wav: not a RIFF/WAVE file: " + path);

  auto u16 = [&](std::size_t o) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[o]) |
                                      (static_cast<unsigned char>(bytes[o + 1]) << 8));
  };
  auto u32 = [&](std::size_t o) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(bytes[o + i]);
    return v;
  };

  // Walk chunks; tolerate extra chunks between fmt and data.
  std::size_t pos = 12;
  int sample_rate = 0;
  std::size_t data_off = 0, data_len = 0;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t len = u32(pos + 4);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (u16(pos + 8) != 1 || u16(pos + 10) != 1 || u16(pos + 22) != 16)
        throw DataError("read_wav: only 16-bit mono PCM supported: " + path);
      sample_rate = static_cast<int>(u32(pos + 12));
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (sample_rate == 0 || data_off == 0 || data_off + data_len > bytes.size())
    throw DataError("read_wav: truncated file: " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    auto q = static_cast<std::int16_t>(u16(data_off + 2 * i));
    w.samples[i] = static_cast<float>(q) / 32767.0f;
  }
  return w;
}

}  // namespace gpvad
