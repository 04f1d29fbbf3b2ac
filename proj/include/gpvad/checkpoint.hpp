#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpvad/model.hpp"

namespace gpvad {

namespace detail {
constexpr char kCkptMagic[8] = {'G', 'P', 'V', 'C', 'K', 'P', 'T', '1'};
}

// Header (format version, config, vocabulary, parameter manifest with
// name/shape/offset) followed by concatenated little-endian float32 arrays.
template <typename S>
void save_checkpoint(CrnnModel<S>& model, const std::string& path) {
  nlohmann::ordered_json hdr;
  hdr["format_version"] = 1;
  nlohmann::ordered_json cfg;
  const CrnnConfig& c = model.config;
  cfg["conv_channels"] = c.conv_channels;
  cfg["leaky_slope"] = c.leaky_slope;
  cfg["pool_p"] = c.pool_p;
  cfg["temporal_pool_strides"] = c.temporal_pool_strides;
  cfg["freq_pool_strides"] = c.freq_pool_strides;
  cfg["gru_hidden"] = c.gru_hidden;
  cfg["bidirectional"] = c.bidirectional;
  cfg["num_events"] = c.num_events;
  cfg["mel_bands"] = c.mel_bands;
  cfg["linear_upsample"] = c.linear_upsample;
  hdr["config"] = cfg;
  hdr["vocabulary"] = {{"names", model.vocabulary.names},
                       {"speech_index", model.vocabulary.speech_index}};

  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  std::vector<float> blob;
  model.for_each_state([&](const std::string& name, Tensor<S>& t) {
    nlohmann::ordered_json p;
    p["name"] = name;
    p["shape"] = t.shape();
    p["offset"] = blob.size();
    params.push_back(p);
    for (std::size_t i = 0; i < t.size(); ++i)
      blob.push_back(static_cast<float>(t[i]));
  });
  hdr["params"] = params;

  const std::string hs = hdr.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(detail::kCkptMagic, 8);
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

template <typename S = float>
CrnnModel<S> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw CheckpointError("bad checkpoint magic: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || hlen == 0 || hlen > (1ull << 24))
    throw CheckpointError("bad checkpoint header length: " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw CheckpointError("truncated checkpoint header: " + path);

  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("unparseable checkpoint header: ") + e.what());
  }
  try {
    if (hdr.at("format_version").get<int>() != 1)
      throw CheckpointError("unsupported checkpoint format version");
    CrnnConfig cfg;
    const auto& jc = hdr.at("config");
    cfg.conv_channels = jc.at("conv_channels").get<std::vector<int>>();
    cfg.leaky_slope = jc.at("leaky_slope").get<double>();
    cfg.pool_p = jc.at("pool_p").get<double>();
    cfg.temporal_pool_strides = jc.at("temporal_pool_strides").get<std::vector<int>>();
    cfg.freq_pool_strides = jc.at("freq_pool_strides").get<std::vector<int>>();
    cfg.gru_hidden = jc.at("gru_hidden").get<int>();
    cfg.bidirectional = jc.at("bidirectional").get<bool>();
    cfg.num_events = jc.at("num_events").get<int>();
    cfg.mel_bands = jc.at("mel_bands").get<int>();
    cfg.linear_upsample = jc.at("linear_upsample").get<bool>();
    cfg.validate();
    LabelVocabulary vocab = LabelVocabulary::from_names(
        hdr.at("vocabulary").at("names").get<std::vector<std::string>>());
    if (hdr.at("vocabulary").at("speech_index").get<std::size_t>() != vocab.speech_index)
      throw CheckpointError("vocabulary speech_index mismatch");

    CrnnModel<S> model = init_model<S>(cfg, vocab, 0);
    std::vector<float> blob;
    {
      std::vector<char> rest((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
      if (rest.size() % sizeof(float) != 0)
        throw CheckpointError("checkpoint data not float-aligned: " + path);
      blob.resize(rest.size() / sizeof(float));
      std::memcpy(blob.data(), rest.data(), rest.size());
    }
    std::size_t cursor = 0;
    const auto& params = hdr.at("params");
    auto it = params.begin();
    model.for_each_state([&](const std::string& name, Tensor<S>& t) {
      if (it == params.end())
        throw CheckpointError("checkpoint missing parameter " + name);
      const auto& p = *it++;
      if (p.at("name").get<std::string>() != name)
        throw CheckpointError("checkpoint parameter order mismatch at " + name);
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      if (shape != t.shape())
        throw CheckpointError("shape mismatch for " + name);
      const std::size_t offset = p.at("offset").get<std::size_t>();
      if (offset != cursor || offset + t.size() > blob.size())
        throw CheckpointError("checkpoint data truncated at " + name);
      for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<S>(blob[offset + i]);
      cursor = offset + t.size();
    });
    if (it != params.end())
      throw CheckpointError("checkpoint has unexpected extra parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
}

}  // namespace gpvad
