#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gpvad/corpus.hpp"

using namespace gpvad;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("gpvad_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("vocabulary rules") {
  auto v = LabelVocabulary::from_names({"Noise", "Speech"});
  CHECK(v.size() == 2);
  CHECK(v.speech_index == 1);
  CHECK(v.index_of("Noise") == 0);
  CHECK_THROWS_AS(v.index_of("Music"), std::invalid_argument);
  CHECK_THROWS_AS(LabelVocabulary::from_names({"Speech"}), std::invalid_argument);
  CHECK_THROWS_AS(LabelVocabulary::from_names({"Noise", "Music"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LabelVocabulary::from_names({"Speech", "Speech"}),
                  std::invalid_argument);
}

TEST_CASE("manifest TSV round-trip") {
  TempDir tmp("manifest");
  std::vector<ClipRecord> recs(2);
  recs[0].clip_id = "clip_0000";
  recs[0].audio_path = "wav/clip_0000.wav";
  recs[0].clip_labels = {"Noise", "Speech"};
  recs[0].snr_db = 10;
  recs[1].clip_id = "clip_0001";
  recs[1].audio_path = "wav/clip_0001.wav";
  recs[1].clip_labels = {"Noise"};
  recs[1].snr_db = -5;

  const auto p = (tmp.path / "m.tsv").string();
  write_manifest(p, recs);
  auto back = read_manifest(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].clip_id == recs[0].clip_id);
  CHECK(back[0].clip_labels == recs[0].clip_labels);
  CHECK(back[0].snr_db == 10);
  CHECK(back[1].snr_db == -5);

  // byte-stable on rewrite
  const auto p2 = (tmp.path / "m2.tsv").string();
  write_manifest(p2, back);
  CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("manifest rejects malformed input") {
  TempDir tmp("manifest_bad");
  const auto p = (tmp.path / "bad.tsv").string();
  {
    std::ofstream out(p);
    out << "wrong\theader\n";
  }
  CHECK_THROWS_AS(read_manifest(p), DataError);
  {
    std::ofstream out(p);
    out << "clip_id\taudio_path\tlabels\tsnr_db\n";
    out << "clip_0000\twav/a.wav\tSpeech\n";  // 3 fields
  }
  CHECK_THROWS_AS(read_manifest(p), DataError);
  {
    std::ofstream out(p);
    out << "clip_id\taudio_path\tlabels\tsnr_db\n";
    out << "clip_0000\twav/a.wav\tSpeech\tloud\n";
  }
  CHECK_THROWS_AS(read_manifest(p), DataError);
}

TEST_CASE("annotation TSV round-trip uses 3 decimals") {
  TempDir tmp("annot");
  std::vector<FrameAnnotation> rows{
      {"clip_0000", 0.5, 1.25, "Speech"},
      {"clip_0000", 0.0, 10.0, "Noise"},
  };
  const auto p = (tmp.path / "a.tsv").string();
  write_annotations(p, rows);
  auto text = slurp(p);
  CHECK(text.find("0.500\t1.250\tSpeech") != std::string::npos);
  auto back = read_annotations(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].onset_s == Catch::Approx(0.5));
  CHECK(back[0].offset_s == Catch::Approx(1.25));
  CHECK(back[0].event_label == "Speech");

  {
    std::ofstream out(p);
    out << "clip_id\tonset\toffset\tevent_label\n";
    out << "clip_0000\t2.000\t1.000\tSpeech\n";  // reversed times
  }
  CHECK_THROWS_AS(read_annotations(p), DataError);
}

TEST_CASE("split keeps every label represented on both sides") {
  std::vector<ClipRecord> recs;
  for (int i = 0; i < 40; ++i) {
    ClipRecord r;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "clip_%04d", i);
    r.clip_id = buf;
    r.clip_labels = {"Noise"};
    if (i % 2 == 0) r.clip_labels.insert("Speech");
    recs.push_back(r);
  }
  std::vector<ClipRecord> train, heldout;
  split_records(recs, 0.9, train, heldout);
  CHECK(train.size() + heldout.size() == recs.size());
  CHECK(heldout.size() >= 2);
  auto has = [](const std::vector<ClipRecord>& v, const std::string& l) {
    for (const auto& r : v)
      if (r.clip_labels.count(l)) return true;
    return false;
  };
  for (const auto& label : {"Noise", "Speech"}) {
    CHECK(has(train, label));
    CHECK(has(heldout, label));
  }
  // deterministic: same input, same split
  std::vector<ClipRecord> train2, heldout2;
  split_records(recs, 0.9, train2, heldout2);
  REQUIRE(train2.size() == train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    REQUIRE(train2[i].clip_id == train[i].clip_id);
}

TEST_CASE("build_corpus produces a consistent on-disk corpus") {
  TempDir tmp("corpus");
  CorpusConfig cfg;
  cfg.num_clips = 24;
  cfg.clip_duration_s = 3.0;
  cfg.seed = 42;
  auto s = build_corpus(cfg, tmp.path.string());
  CHECK(s.num_clips == 24);
  CHECK(s.num_speech_clips > 0);
  CHECK(s.num_speech_clips < 24);

  auto train = read_manifest(s.train_manifest);
  auto heldout = read_manifest(s.heldout_manifest);
  REQUIRE(train.size() + heldout.size() == 24);
  REQUIRE(!heldout.empty());

  auto annots = read_annotations(s.annotation_file);
  REQUIRE(!annots.empty());

  std::set<std::string> annotated_ids;
  for (const auto& a : annots) {
    annotated_ids.insert(a.clip_id);
    CHECK(a.offset_s <= cfg.clip_duration_s + 1e-9);
  }

  for (const auto* m : {&train, &heldout}) {
    for (const auto& r : *m) {
      // wav exists, right length, right rate
      auto w = read_wav(r.audio_path);
      CHECK(w.sample_rate == kSampleRate);
      CHECK(w.samples.size() ==
            static_cast<std::size_t>(cfg.clip_duration_s * kSampleRate));
      CHECK(r.snr_db >= cfg.snr_lo_db);
      CHECK(r.snr_db <= cfg.snr_hi_db);
      // every clip carries a noise label; speech label implies speech annotation
      CHECK(r.clip_labels.count("Noise") == 1);
      CHECK(annotated_ids.count(r.clip_id) == 1);
      bool speech_annotated = false;
      for (const auto& a : annots)
        if (a.clip_id == r.clip_id && a.event_label == "Speech")
          speech_annotated = true;
      CHECK(speech_annotated == (r.clip_labels.count("Speech") == 1));
    }
  }

  auto vocab = vocabulary_from_manifests({&train, &heldout});
  CHECK(vocab.size() == 2);
  CHECK(vocab.names[vocab.speech_index] == "Speech");
}

TEST_CASE("build_corpus is byte-deterministic for a fixed seed") {
  TempDir a("corpus_det_a"), b("corpus_det_b");
  CorpusConfig cfg;
  cfg.num_clips = 8;
  cfg.clip_duration_s = 2.0;
  cfg.seed = 7;
  auto sa = build_corpus(cfg, a.path.string());
  auto sb = build_corpus(cfg, b.path.string());
  CHECK(slurp(sa.annotation_file) == slurp(sb.annotation_file));
  // manifests differ only in the directory prefix of audio_path
  auto ra = read_manifest(sa.train_manifest);
  auto rb = read_manifest(sb.train_manifest);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].clip_id == rb[i].clip_id);
    CHECK(ra[i].clip_labels == rb[i].clip_labels);
    CHECK(ra[i].snr_db == rb[i].snr_db);
    CHECK(slurp(ra[i].audio_path) == slurp(rb[i].audio_path));
  }

  // different seed changes the audio
  CorpusConfig cfg2 = cfg;
  cfg2.seed = 8;
  TempDir c("corpus_det_c");
  auto sc = build_corpus(cfg2, c.path.string());
  CHECK(slurp(sa.annotation_file) != slurp(sc.annotation_file));
}

TEST_CASE("fine noise labels name each kind") {
  TempDir tmp("corpus_fine");
  CorpusConfig cfg;
  cfg.num_clips = 16;
  cfg.clip_duration_s = 2.0;
  cfg.fine_noise_labels = true;
  auto s = build_corpus(cfg, tmp.path.string());
  bool saw_fine = false;
  for (const auto& [label, count] : s.label_counts)
    if (label.rfind("Noise_", 0) == 0) saw_fine = true;
  CHECK(saw_fine);
  CHECK(s.label_counts.count("Noise") == 0);
}
