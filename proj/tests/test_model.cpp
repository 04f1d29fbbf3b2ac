#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>

#include "gpvad/checkpoint.hpp"
#include "gpvad/model.hpp"

using namespace gpvad;
namespace fs = std::filesystem;

namespace {

CrnnConfig tiny_config() {
  CrnnConfig cfg;
  cfg.conv_channels = {4, 8};
  cfg.temporal_pool_strides = {2, 2};
  cfg.freq_pool_strides = {8, 4};
  cfg.gru_hidden = 8;
  cfg.mel_bands = 64;
  cfg.num_events = 2;
  return cfg;
}

LabelVocabulary tiny_vocab() { return LabelVocabulary::from_names({"Noise", "Speech"}); }

Tensor<float> random_feats(std::size_t B, std::size_t T, std::size_t F,
                           std::uint64_t seed) {
  std::mt19937 rng(static_cast<unsigned>(seed));
  std::normal_distribution<float> g(0.0f, 1.0f);
  Tensor<float> x({B, T, F});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = g(rng);
  return x;
}

FeatureMatrix random_feature_matrix(std::size_t T, std::size_t F, std::uint64_t seed) {
  FeatureMatrix f;
  f.values = Tensor<float>({T, F});
  auto r = random_feats(1, T, F, seed);
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = r[i];
  return f;
}

}  // namespace

TEST_CASE("config validation") {
  CrnnConfig cfg = tiny_config();
  cfg.validate();
  CHECK(cfg.temporal_factor() == 4);
  CHECK(cfg.freq_out() == 2);
  CHECK(cfg.gru_input_dim() == 16);
  CHECK(cfg.gru_out_dim() == 16);

  CrnnConfig bad = cfg;
  bad.temporal_pool_strides = {2, 4};  // product 8
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.freq_pool_strides = {8};  // list length mismatch
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.pool_p = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.num_events = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("init is deterministic and recurrent weights are orthogonal") {
  auto a = init_model<float>(tiny_config(), tiny_vocab(), 5);
  auto b = init_model<float>(tiny_config(), tiny_vocab(), 5);
  bool same = true;
  std::vector<const Tensor<float>*> pa, pb;
  a.for_each_param([&](const std::string&, Tensor<float>& t) { pa.push_back(&t); });
  b.for_each_param([&](const std::string&, Tensor<float>& t) { pb.push_back(&t); });
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->size(); ++j)
      if ((*pa[i])[j] != (*pb[i])[j]) same = false;
  CHECK(same);

  auto c = init_model<float>(tiny_config(), tiny_vocab(), 6);
  CHECK(c.proj_w[0] != a.proj_w[0]);

  // each H x H gate block of w_hh has orthonormal rows
  const std::size_t H = 8;
  for (int gate = 0; gate < 3; ++gate) {
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < H; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < H; ++k)
          dot += static_cast<double>(a.gru_fwd.w_hh.at(gate * H + i, k)) *
                 static_cast<double>(a.gru_fwd.w_hh.at(gate * H + j, k));
        REQUIRE(dot == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-5));
      }
  }

  // BN starts as identity
  CHECK(a.blocks[0].bn_gamma[0] == 1.0f);
  CHECK(a.blocks[0].bn_beta[0] == 0.0f);
  CHECK(a.blocks[0].bn_running_var[0] == 1.0f);
}

TEST_CASE("leaky ReLU") {
  CHECK(leaky_relu(2.0f, 0.1f) == 2.0f);
  CHECK(leaky_relu(-2.0f, 0.1f) == Catch::Approx(-0.2f));
  CHECK(leaky_relu(0.0f, 0.1f) == 0.0f);
}

TEST_CASE("lp_pool fixtures and limits") {
  // constant input: any L^p mean returns the constant
  Tensor<float> c({4, 4});
  c.fill(0.5f);
  auto out = lp_pool(c, 2, 2, 4.0);
  REQUIRE(out.dim(0) == 2);
  REQUIRE(out.dim(1) == 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == Catch::Approx(0.5).margin(1e-6));

  // hand trace: window {1, 0, 0, 0}, p=4 -> (1/4)^(1/4)
  Tensor<float> x({2, 2});
  x.at(0, 0) = 1.0f;
  out = lp_pool(x, 2, 2, 4.0);
  CHECK(out.at(0, 0) == Catch::Approx(std::pow(0.25, 0.25)));

  // ceil-division output dims with a partial edge window
  Tensor<float> y({5, 3});
  y.fill(1.0f);
  out = lp_pool(y, 2, 2, 4.0);
  REQUIRE(out.dim(0) == 3);
  REQUIRE(out.dim(1) == 2);
  // edge windows average over actual element count, so constants stay put
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == Catch::Approx(1.0).margin(1e-6));

  // p = 1 is the mean of |x|; large p approaches the max
  Tensor<float> z({2, 2});
  z.at(0, 0) = -1.0f;
  z.at(0, 1) = 2.0f;
  z.at(1, 0) = 3.0f;
  z.at(1, 1) = -4.0f;
  CHECK(lp_pool(z, 2, 2, 1.0).at(0, 0) == Catch::Approx(2.5));
  CHECK(lp_pool(z, 2, 2, 64.0).at(0, 0) == Catch::Approx(4.0).margin(0.1));
  // monotone in p
  CHECK(lp_pool(z, 2, 2, 4.0).at(0, 0) > lp_pool(z, 2, 2, 2.0).at(0, 0));
}

TEST_CASE("upsample_time repeats frames") {
  Tensor<float> x({2, 1});
  x.at(0, 0) = 1.0f;
  x.at(1, 0) = 2.0f;
  auto out = upsample_time(x, 8, 4);
  REQUIRE(out.dim(0) == 8);
  for (std::size_t t = 0; t < 4; ++t) CHECK(out.at(t, 0) == 1.0f);
  for (std::size_t t = 4; t < 8; ++t) CHECK(out.at(t, 0) == 2.0f);
  // target beyond T * factor clamps to the last frame
  out = upsample_time(x, 10, 4);
  CHECK(out.at(9, 0) == 2.0f);
}

TEST_CASE("linear softmax pooling") {
  Tensor<float> p({2, 1});
  p.at(0, 0) = 0.8f;
  p.at(1, 0) = 0.2f;
  auto y = linear_softmax_pool(p);
  CHECK(y[0] == Catch::Approx((0.64 + 0.04) / 1.0));

  // constant sequence pools to the constant
  Tensor<float> c({5, 2});
  c.fill(0.3f);
  y = linear_softmax_pool(c);
  CHECK(y[0] == Catch::Approx(0.3).margin(1e-6));
  CHECK(y[1] == Catch::Approx(0.3).margin(1e-6));

  // all-zero column guards the denominator
  Tensor<float> z({3, 1});
  y = linear_softmax_pool(z);
  CHECK(y[0] == 0.0f);

  // result lies between min and max of the column (weighted mean, weights y)
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> unit(0.01f, 1.0f);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<float> q({7, 1});
    float lo = 1.0f, hi = 0.0f;
    for (std::size_t t = 0; t < 7; ++t) {
      q.at(t, 0) = unit(rng);
      lo = std::min(lo, q.at(t, 0));
      hi = std::max(hi, q.at(t, 0));
    }
    auto v = linear_softmax_pool(q);
    REQUIRE(v[0] >= lo - 1e-6f);
    REQUIRE(v[0] <= hi + 1e-6f);
  }
}

TEST_CASE("forward: shapes, ranges, temporal structure") {
  auto model = init_model<float>(tiny_config(), tiny_vocab(), 1);
  // 21 frames: deliberately not divisible by the x4 temporal factor
  FeatureMatrix feats = random_feature_matrix(21, 64, 9);
  feats.clip_id = "x";
  auto [seq, clip] = forward(model, feats);
  REQUIRE(seq.values.dim(0) == 21);
  REQUIRE(seq.values.dim(1) == 2);
  REQUIRE(clip.size() == 2);
  float lo = 1.0f, hi = 0.0f;
  for (std::size_t t = 0; t < 21; ++t)
    for (std::size_t e = 0; e < 2; ++e) {
      REQUIRE(seq.values.at(t, e) > 0.0f);
      REQUIRE(seq.values.at(t, e) < 1.0f);
      if (e == 0) {
        lo = std::min(lo, seq.values.at(t, 0));
        hi = std::max(hi, seq.values.at(t, 0));
      }
    }
  // clip probability is a self-weighted mean of frame probabilities
  CHECK(clip[0] >= lo - 1e-6f);
  CHECK(clip[0] <= hi + 1e-6f);

  // x4 subsampling + nearest upsampling: values constant over blocks of 4
  for (std::size_t t = 0; t + 3 < 20; t += 4)
    for (std::size_t e = 0; e < 2; ++e) {
      CHECK(seq.values.at(t, e) == seq.values.at(t + 1, e));
      CHECK(seq.values.at(t, e) == seq.values.at(t + 3, e));
    }

  // deterministic
  auto [seq2, clip2] = forward(model, feats);
  for (std::size_t i = 0; i < seq.values.size(); ++i)
    REQUIRE(seq.values[i] == seq2.values[i]);
}

TEST_CASE("eval-mode forward is batch-composable") {
  auto model = init_model<float>(tiny_config(), tiny_vocab(), 2);
  auto batch = random_feats(2, 16, 64, 4);
  auto res = forward_batch(model, batch, {16, 12}, false);

  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t len = b == 0 ? 16 : 12;
    Tensor<float> one({1, len, 64});
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t f = 0; f < 64; ++f) one.at(0, t, f) = batch.at(b, t, f);
    auto solo = forward_batch(model, one, {len}, false);
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t e = 0; e < 2; ++e)
        REQUIRE(solo.probs.at(0, t, e) ==
                Catch::Approx(res.probs.at(b, t, e)).margin(1e-6));
    for (std::size_t e = 0; e < 2; ++e)
      REQUIRE(solo.clip_probs.at(0, e) ==
              Catch::Approx(res.clip_probs.at(b, e)).margin(1e-6));
  }
  // padded frames carry zero probability
  for (std::size_t t = 12; t < 16; ++t)
    for (std::size_t e = 0; e < 2; ++e) CHECK(res.probs.at(1, t, e) == 0.0f);
}

TEST_CASE("training forward/backward is invariant to extra padding") {
  auto m1 = init_model<float>(tiny_config(), tiny_vocab(), 3);
  auto m2 = m1;

  const std::vector<std::size_t> lengths{18, 13};
  auto base = random_feats(2, 18, 64, 8);
  Tensor<float> padded({2, 31, 64});  // same data, much more padding
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t f = 0; f < 64; ++f)
        padded.at(b, t, f) = base.at(b, t, f);

  ForwardContext<float> c1, c2;
  auto r1 = forward_batch(m1, base, lengths, true, &c1);
  auto r2 = forward_batch(m2, padded, lengths, true, &c2);

  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t e = 0; e < 2; ++e)
        REQUIRE(r1.probs.at(b, t, e) ==
                Catch::Approx(r2.probs.at(b, t, e)).margin(1e-6));
    for (std::size_t e = 0; e < 2; ++e)
      REQUIRE(r1.clip_probs.at(b, e) ==
              Catch::Approx(r2.clip_probs.at(b, e)).margin(1e-6));
  }

  // BN running statistics must also agree
  for (std::size_t i = 0; i < m1.blocks.size(); ++i)
    for (std::size_t c = 0; c < m1.blocks[i].bn_running_mean.size(); ++c) {
      REQUIRE(m1.blocks[i].bn_running_mean[c] ==
              Catch::Approx(m2.blocks[i].bn_running_mean[c]).margin(1e-7));
      REQUIRE(m1.blocks[i].bn_running_var[c] ==
              Catch::Approx(m2.blocks[i].bn_running_var[c]).margin(1e-7));
    }

  // identical upstream gradients -> identical parameter gradients
  Tensor<float> dclip({2, 2});
  dclip.fill(1.0f);
  Tensor<float> dp1({2, 18, 2}), dp2({2, 31, 2});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t e = 0; e < 2; ++e) {
        dp1.at(b, t, e) = 0.5f;
        dp2.at(b, t, e) = 0.5f;
      }
  auto g1 = backward_batch(m1, c1, &dp1, &dclip);
  auto g2 = backward_batch(m2, c2, &dp2, &dclip);
  std::vector<std::pair<std::string, Tensor<float>*>> p1, p2;
  g1.for_each_param([&](const std::string& n, Tensor<float>& t) { p1.push_back({n, &t}); });
  g2.for_each_param([&](const std::string& n, Tensor<float>& t) { p2.push_back({n, &t}); });
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    REQUIRE(p1[i].first == p2[i].first);
    for (std::size_t j = 0; j < p1[i].second->size(); ++j) {
      const float a = (*p1[i].second)[j];
      const float b = (*p2[i].second)[j];
      REQUIRE(a == Catch::Approx(b).margin(1e-6));
    }
  }
}

TEST_CASE("backward requires a training-mode context") {
  auto model = init_model<float>(tiny_config(), tiny_vocab(), 4);
  auto batch = random_feats(1, 8, 64, 2);
  ForwardContext<float> ctx;
  forward_batch(model, batch, {8}, false, &ctx);
  Tensor<float> dclip({1, 2});
  dclip.fill(1.0f);
  CHECK_THROWS_AS(backward_batch(model, ctx,
                                 static_cast<const Tensor<float>*>(nullptr), &dclip),
                  std::logic_error);
}

TEST_CASE("checkpoint round-trip preserves outputs exactly") {
  const auto dir = fs::temp_directory_path() / "gpvad_ckpt";
  fs::create_directories(dir);
  const auto path = (dir / "m.ckpt").string();

  auto model = init_model<float>(tiny_config(), tiny_vocab(), 11);
  // perturb running stats so they are exercised by the round-trip
  model.blocks[0].bn_running_mean[0] = 0.25f;
  model.blocks[0].bn_running_var[0] = 2.0f;
  save_checkpoint(model, path);
  auto back = load_checkpoint<float>(path);

  CHECK(back.vocabulary.names == model.vocabulary.names);
  CHECK(back.config.conv_channels == model.config.conv_channels);
  CHECK(back.blocks[0].bn_running_mean[0] == 0.25f);

  FeatureMatrix feats = random_feature_matrix(12, 64, 6);
  auto [s1, c1] = forward(model, feats);
  auto [s2, c2] = forward(back, feats);
  for (std::size_t i = 0; i < s1.values.size(); ++i)
    REQUIRE(s1.values[i] == s2.values[i]);
  REQUIRE(c1 == c2);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint corruption raises CheckpointError") {
  const auto dir = fs::temp_directory_path() / "gpvad_ckpt_bad";
  fs::create_directories(dir);
  const auto path = (dir / "m.ckpt").string();
  auto model = init_model<float>(tiny_config(), tiny_vocab(), 12);
  save_checkpoint(model, path);

  // truncated blob
  {
    std::ifstream in(path, std::ios::binary);
    std::string all{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::ofstream out(path + ".t", std::ios::binary);
    out.write(all.data(), static_cast<std::streamsize>(all.size() - 40));
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path + ".t"), CheckpointError);

  // bad magic
  {
    std::ofstream out(path + ".m", std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(load_checkpoint<float>(path + ".m"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint<float>((dir / "missing.ckpt").string()),
                  CheckpointError);

  // CheckpointError is a DataError, so callers can catch the family
  try {
    load_checkpoint<float>(path + ".m");
    FAIL("expected a throw");
  } catch (const DataError&) {
    SUCCEED();
  }
  fs::remove_all(dir);
}
