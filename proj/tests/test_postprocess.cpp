#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gpvad/postprocess.hpp"
#include "oracles.hpp"

using namespace gpvad;

namespace {
ThresholdConfig defaults() { return ThresholdConfig{}; }
}  // namespace

TEST_CASE("double_threshold hand traces") {
  // run above phi_low seeded by a frame above phi_hi
  auto out = double_threshold({0.05f, 0.2f, 0.6f, 0.3f, 0.05f}, defaults());
  CHECK(out == std::vector<std::uint8_t>{0, 1, 1, 1, 0});

  // above phi_low throughout but never seeded
  out = double_threshold({0.2f, 0.4f, 0.3f}, defaults());
  CHECK(out == std::vector<std::uint8_t>{0, 0, 0});

  out = double_threshold({0.0f, 0.0f, 0.0f}, defaults());
  CHECK(out == std::vector<std::uint8_t>{0, 0, 0});
}

TEST_CASE("double_threshold invariants on random sequences") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> probs(static_cast<std::size_t>(len(rng)));
    for (auto& p : probs) p = unit(rng);
    ThresholdConfig cfg = defaults();
    auto out = double_threshold(probs, cfg);

    // sandwich: superset of thresholding at phi_hi, subset of phi_low
    auto hi = oracles::simple_threshold(probs, cfg.phi_hi);
    auto lo = oracles::simple_threshold(probs, cfg.phi_low);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      REQUIRE(out[i] >= hi[i]);
      REQUIRE(out[i] <= lo[i]);
    }

    // monotonicity: raising phi_hi never adds frames, lowering phi_low
    // never removes them
    ThresholdConfig hi_up = cfg;
    hi_up.phi_hi = std::min(1.0, cfg.phi_hi + 0.2);
    auto out_hi = double_threshold(probs, hi_up);
    ThresholdConfig lo_down = cfg;
    lo_down.phi_low = cfg.phi_low / 2.0;
    auto out_lo = double_threshold(probs, lo_down);
    for (std::size_t i = 0; i < probs.size(); ++i) {
      REQUIRE(out_hi[i] <= out[i]);
      REQUIRE(out_lo[i] >= out[i]);
    }

    // idempotence on the binarized output
    std::vector<float> as_float(out.begin(), out.end());
    auto again = double_threshold(as_float, cfg);
    REQUIRE(again == out);
  }
}

TEST_CASE("binary_to_segments") {
  auto segs = binary_to_segments({0, 1, 1, 0}, 0.02);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].onset_s == Catch::Approx(0.02));
  CHECK(segs[0].offset_s == Catch::Approx(0.06));

  segs = binary_to_segments({1, 1, 1, 1, 1}, 0.02);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].onset_s == Catch::Approx(0.0));
  CHECK(segs[0].offset_s == Catch::Approx(0.10));

  segs = binary_to_segments({1, 0, 1}, 0.02);
  REQUIRE(segs.size() == 2);
}

TEST_CASE("segments round-trip at frame boundaries") {
  std::mt19937 rng(77);
  std::uniform_int_distribution<int> len(4, 60);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> binary(static_cast<std::size_t>(len(rng)));
    for (auto& b : binary) b = unit(rng) < 0.4f ? 1 : 0;
    auto segs = binary_to_segments(binary, 0.02);
    auto back = segments_to_binary(segs, binary.size(), 0.02);
    REQUIRE(back == binary);
  }
}

TEST_CASE("extract_speech uses only the Speech column") {
  LabelVocabulary vocab = LabelVocabulary::from_names({"Noise", "Speech"});
  ProbSequence seq;
  seq.vocabulary = vocab;
  seq.frame_hop_s = 0.02;
  seq.values = Tensor<float>({5, 2});
  const float speech[5] = {0.05f, 0.2f, 0.6f, 0.3f, 0.05f};
  for (std::size_t t = 0; t < 5; ++t) {
    seq.values.at(t, 0) = 0.9f;  // noise column must be ignored
    seq.values.at(t, 1) = speech[t];
  }
  auto segs = extract_speech(seq, defaults());
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].onset_s == Catch::Approx(0.02));
  CHECK(segs[0].offset_s == Catch::Approx(0.08));

  // active non-speech column alone yields nothing
  for (std::size_t t = 0; t < 5; ++t) seq.values.at(t, 1) = 0.0f;
  CHECK(extract_speech(seq, defaults()).empty());
}

TEST_CASE("threshold config validation") {
  ThresholdConfig bad;
  bad.phi_low = 0.7;
  bad.phi_hi = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
