// gpvad: synthetic-corpus VAD pipeline driver.
// Subcommands: synth, extract, train, infer, eval, plot.
// Exit codes: 0 success, 2 usage/input error, 3 data/model corruption,
// 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gpvad/checkpoint.hpp"
#include "gpvad/corpus.hpp"
#include "gpvad/eval.hpp"
#include "gpvad/features.hpp"
#include "gpvad/model.hpp"
#include "gpvad/plot.hpp"
#include "gpvad/postprocess.hpp"
#include "gpvad/train.hpp"

namespace fs = std::filesystem;
using namespace gpvad;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GPVAD_SEED"))
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  return 42;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& f : split_fields(s, ','))
    if (!f.empty()) out.push_back(std::stoi(f));
  return out;
}

// "lo:hi" or "lo:hi:step" (only step 1 supported)
void parse_snr_range(const std::string& s, int& lo, int& hi) {
  auto f = split_fields(s, ':');
  require(f.size() == 2 || f.size() == 3, "snr range must be lo:hi[:step]");
  lo = std::stoi(f[0]);
  hi = std::stoi(f[1]);
  if (f.size() == 3) require(std::stoi(f[2]) == 1, "only 1 dB SNR steps supported");
  require(lo <= hi, "snr range: lo > hi");
}

// Collapse every non-Speech label to "Noise" (binary / frame regimes).
void collapse_labels(std::vector<ClipRecord>& records) {
  for (auto& r : records) {
    std::set<std::string> labels;
    for (const auto& l : r.clip_labels) labels.insert(l == "Speech" ? "Speech" : "Noise");
    r.clip_labels = std::move(labels);
    for (auto& a : r.frame_annotations)
      if (a.event_label != "Speech") a.event_label = "Noise";
  }
}

void collapse_annotation_labels(std::vector<FrameAnnotation>& rows) {
  for (auto& a : rows)
    if (a.event_label != "Speech") a.event_label = "Noise";
}

// flat key=value config mirroring TrainConfig field names
void apply_train_config_file(const std::string& path, TrainConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "regime")
      cfg.regime = val == "frame_level" ? Regime::frame_level : Regime::clip_level;
    else if (key == "batch_size")
      cfg.batch_size = std::stoull(val);
    else if (key == "optimizer")
      cfg.optimizer = val == "sgd" ? Optimizer::sgd : Optimizer::adam;
    else if (key == "learning_rate")
      cfg.learning_rate = std::stod(val);
    else if (key == "early_stop_patience")
      cfg.early_stop_patience = std::stoi(val);
    else if (key == "max_epochs")
      cfg.max_epochs = std::stoi(val);
    else if (key == "seed")
      cfg.seed = std::stoull(val);
    else
      throw std::invalid_argument("unknown config key: " + key);
  }
}

std::map<std::string, std::string> feature_path_map(const std::string& index_path) {
  std::map<std::string, std::string> out;
  for (const auto& row : read_feature_index(index_path))
    out[row.clip_id] = row.feature_path;
  return out;
}

int cmd_synth(const std::string& out_dir, std::size_t clips, double duration,
              const std::string& snr, double speech_fraction, bool fine_labels,
              std::uint64_t seed) {
  CorpusConfig cfg;
  cfg.num_clips = clips;
  cfg.clip_duration_s = duration;
  parse_snr_range(snr, cfg.snr_lo_db, cfg.snr_hi_db);
  cfg.speech_fraction = speech_fraction;
  cfg.fine_noise_labels = fine_labels;
  cfg.seed = seed;
  const CorpusSummary s = build_corpus(cfg, out_dir);
  std::cout << "clips: " << s.num_clips << " (" << s.num_speech_clips
            << " with speech)\n";
  std::cout << "train manifest: " << s.train_manifest << "\n";
  std::cout << "heldout manifest: " << s.heldout_manifest << "\n";
  std::cout << "annotations: " << s.annotation_file << "\n";
  for (const auto& [label, n] : s.label_counts)
    std::cout << "label " << label << ": " << n << " clips\n";
  return 0;
}

int cmd_extract(const std::vector<std::string>& manifests, const std::string& out_dir) {
  fs::create_directories(out_dir);
  StftConfig scfg;
  std::vector<FeatureIndexRow> index;
  for (const auto& mpath : manifests) {
    for (const auto& rec : read_manifest(mpath)) {
      const Waveform w = read_wav(rec.audio_path);
      const FeatureMatrix f = extract_logmel(w, scfg, rec.clip_id);
      const std::string fpath = (fs::path(out_dir) / (rec.clip_id + ".feat")).string();
      write_feature_file(fpath, f);
      index.push_back({rec.clip_id, fpath, f.frames()});
    }
  }
  std::sort(index.begin(), index.end(),
            [](const FeatureIndexRow& a, const FeatureIndexRow& b) {
              return a.clip_id < b.clip_id;
            });
  const std::string ipath = (fs::path(out_dir) / "features.tsv").string();
  write_feature_index(ipath, index);
  std::cout << "feature index: " << ipath << " (" << index.size() << " clips)\n";
  return 0;
}

int cmd_train(const std::string& features, const std::string& train_manifest,
              const std::string& heldout_manifest, const std::string& annotations,
              const std::string& out_dir, const std::string& model_kind,
              const std::string& regime_flag, TrainConfig tcfg, bool tcfg_lr_set,
              bool tcfg_batch_set, const std::string& conv_channels,
              const std::string& t_strides, const std::string& f_strides,
              int gru_hidden, std::uint64_t seed) {
  require(model_kind == "gpvf" || model_kind == "gpvb" || model_kind == "vadc",
          "--model must be gpvf, gpvb, or vadc");
  // model kind fixes the regime; an explicit contradictory flag is an error
  const bool frame = model_kind == "vadc";
  if (!regime_flag.empty()) {
    require(regime_flag == "clip" || regime_flag == "frame",
            "--regime must be clip or frame");
    require((regime_flag == "frame") == frame,
            "--regime conflicts with --model " + model_kind);
  }
  tcfg.regime = frame ? Regime::frame_level : Regime::clip_level;
  if (!tcfg_batch_set) tcfg.batch_size = frame ? 20 : 64;
  if (frame) {
    tcfg.optimizer = Optimizer::sgd;
    if (!tcfg_lr_set) tcfg.learning_rate = 1e-5;
  } else {
    tcfg.optimizer = Optimizer::adam;
    if (!tcfg_lr_set) tcfg.learning_rate = 1e-4;
  }
  tcfg.seed = seed;

  auto train_recs = read_manifest(train_manifest);
  auto heldout_recs = read_manifest(heldout_manifest);
  auto ann = read_annotations(annotations);
  if (model_kind != "gpvf") {
    collapse_labels(train_recs);
    collapse_labels(heldout_recs);
    collapse_annotation_labels(ann);
  }
  const LabelVocabulary vocab = vocabulary_from_manifests({&train_recs, &heldout_recs});
  const auto fpaths = feature_path_map(features);
  const auto train_clips = load_dataset(train_recs, ann, fpaths, vocab);
  const auto heldout_clips = load_dataset(heldout_recs, ann, fpaths, vocab);

  CrnnConfig mcfg;
  if (!conv_channels.empty()) mcfg.conv_channels = parse_int_list(conv_channels);
  if (!t_strides.empty()) mcfg.temporal_pool_strides = parse_int_list(t_strides);
  if (!f_strides.empty()) mcfg.freq_pool_strides = parse_int_list(f_strides);
  if (gru_hidden > 0) mcfg.gru_hidden = gru_hidden;
  mcfg.num_events = static_cast<int>(vocab.size());
  mcfg.validate();

  fs::create_directories(out_dir);
  CrnnModel<float> model = init_model<float>(mcfg, vocab, seed);
  TrainResult result = train(std::move(model), train_clips, heldout_clips, tcfg);
  const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
  save_checkpoint(result.best_model, ckpt);
  write_train_log((fs::path(out_dir) / "train_log.jsonl").string(), result.log);
  std::cout << "checkpoint: " << ckpt << "\n";
  std::cout << "best epoch: " << result.best_epoch << " of " << result.log.size()
            << (result.diverged ? " (diverged; last good checkpoint kept)" : "")
            << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& features,
              const std::string& out_tsv, const std::string& scores_out,
              double phi_low, double phi_hi) {
  CrnnModel<float> model = load_checkpoint<float>(checkpoint);
  ThresholdConfig th;
  th.phi_low = phi_low;
  th.phi_hi = phi_hi;
  th.validate();

  std::map<std::string, std::vector<SpeechSegment>> preds;
  std::map<std::string, std::vector<float>> scores;
  for (const auto& row : read_feature_index(features)) {
    const FeatureMatrix f = read_feature_file(row.feature_path);
    auto [seq, clip] = forward(model, f, /*training=*/false);
    (void)clip;
    std::vector<float> col(seq.values.dim(0));
    for (std::size_t t = 0; t < col.size(); ++t)
      col[t] = seq.values.at(t, model.vocabulary.speech_index);
    preds[row.clip_id] = extract_speech(seq, th);
    scores[row.clip_id] = std::move(col);
  }
  write_predictions(out_tsv, preds);
  if (!scores_out.empty()) write_scores(scores_out, scores);
  std::cout << "predictions: " << out_tsv << "\n";
  return 0;
}

int cmd_eval(const std::string& reference, const std::string& predictions,
             const std::string& scores, const std::string& report_out) {
  std::optional<std::string> sc;
  if (!scores.empty()) sc = scores;
  const EvalReport r = evaluate_files(reference, predictions, sc);
  if (!report_out.empty()) {
    std::ofstream out(report_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + report_out);
    out << r.to_json().dump(2) << "\n";
  }
  std::cout << render_report_table({{"prediction", r}});
  return 0;
}

int cmd_plot(const std::string& scores_tsv, const std::string& reference_tsv,
             const std::string& clip_id, const std::string& out_svg,
             double phi_low, double phi_hi) {
  const auto scores = read_scores(scores_tsv);
  auto it = scores.find(clip_id);
  require(it != scores.end(), "clip not present in scores dump: " + clip_id);
  std::vector<SpeechSegment> ref;
  for (const auto& a : read_annotations(reference_tsv))
    if (a.clip_id == clip_id && a.event_label == "Speech")
      ref.push_back({a.onset_s, a.offset_s});
  write_probability_svg(out_svg, it->second, ref, 0.020, phi_low, phi_hi, clip_id);
  fs::path csv = fs::path(out_svg).replace_extension(".csv");
  write_probability_csv(csv.string(), it->second, ref, 0.020);
  std::cout << "plot: " << out_svg << "\ncsv: " << csv.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly-supervised voice activity detection pipeline"};
  app.require_subcommand(1);
  std::uint64_t seed = default_seed();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  std::string synth_out = "corpus";
  std::size_t synth_clips = 200;
  double synth_duration = 10.0;
  std::string synth_snr = "5:15:1";
  double synth_speech_fraction = 0.6;
  bool synth_fine = false;
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--clips", synth_clips, "Number of clips");
  synth->add_option("--duration", synth_duration, "Clip duration in seconds");
  synth->add_option("--snr", synth_snr, "SNR range lo:hi[:step], 1 dB steps");
  synth->add_option("--speech-fraction", synth_speech_fraction,
                    "Fraction of clips containing speech");
  synth->add_flag("--fine-labels", synth_fine, "Label noise per kind");
  synth->add_option("--seed", seed, "Random seed");

  // extract
  auto* extract = app.add_subcommand("extract", "Extract log-Mel features");
  std::vector<std::string> extract_manifests;
  std::string extract_out = "features";
  extract->add_option("--manifest", extract_manifests, "Clip manifest(s)")->required();
  extract->add_option("--out", extract_out, "Output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string tr_features, tr_train, tr_heldout, tr_ann, tr_out = "run";
  std::string tr_model = "gpvb", tr_regime, tr_config;
  std::string tr_channels, tr_tstrides, tr_fstrides;
  int tr_gru = 0;
  TrainConfig tcfg;
  train_cmd->add_option("--features", tr_features, "Feature index TSV")->required();
  train_cmd->add_option("--train-manifest", tr_train, "Training manifest")->required();
  train_cmd->add_option("--heldout-manifest", tr_heldout, "Held-out manifest")->required();
  train_cmd->add_option("--annotations", tr_ann, "Frame annotation TSV")->required();
  train_cmd->add_option("--out", tr_out, "Output directory");
  train_cmd->add_option("--model", tr_model, "gpvf | gpvb | vadc");
  train_cmd->add_option("--regime", tr_regime, "clip | frame");
  train_cmd->add_option("--config", tr_config, "Flat key=value training config");
  auto* lr_opt = train_cmd->add_option("--lr", tcfg.learning_rate, "Learning rate");
  auto* bs_opt = train_cmd->add_option("--batch-size", tcfg.batch_size, "Batch size");
  train_cmd->add_option("--epochs", tcfg.max_epochs, "Maximum epochs");
  train_cmd->add_option("--patience", tcfg.early_stop_patience, "Early-stop patience");
  train_cmd->add_option("--conv-channels", tr_channels, "e.g. 32,64,128");
  train_cmd->add_option("--temporal-strides", tr_tstrides, "e.g. 2,2,1");
  train_cmd->add_option("--freq-strides", tr_fstrides, "e.g. 4,4,2");
  train_cmd->add_option("--gru-hidden", tr_gru, "GRU hidden units");
  train_cmd->add_option("--seed", seed, "Random seed");

  // infer
  auto* infer = app.add_subcommand("infer", "Run inference on extracted features");
  std::string in_ckpt, in_features, in_out = "predictions.tsv", in_scores;
  double phi_low = 0.1, phi_hi = 0.5;
  infer->add_option("--checkpoint", in_ckpt, "Model checkpoint")->required();
  infer->add_option("--features", in_features, "Feature index TSV")->required();
  infer->add_option("--out", in_out, "Prediction TSV path");
  infer->add_option("--scores", in_scores, "Optional per-frame score dump path");
  infer->add_option("--phi-low", phi_low, "Lower hysteresis threshold");
  infer->add_option("--phi-hi", phi_hi, "Upper hysteresis threshold");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against reference");
  std::string ev_ref, ev_pred, ev_scores, ev_report;
  eval_cmd->add_option("--reference", ev_ref, "Reference annotation TSV")->required();
  eval_cmd->add_option("--predictions", ev_pred, "Prediction TSV")->required();
  eval_cmd->add_option("--scores", ev_scores, "Per-frame score dump (for AUC)");
  eval_cmd->add_option("--report", ev_report, "Report JSON output path");

  // plot
  auto* plot = app.add_subcommand("plot", "Plot one clip's probability curve");
  std::string pl_scores, pl_ref, pl_clip, pl_out = "plot.svg";
  double pl_low = 0.1, pl_hi = 0.5;
  plot->add_option("--scores", pl_scores, "Per-frame score dump")->required();
  plot->add_option("--reference", pl_ref, "Reference annotation TSV")->required();
  plot->add_option("--clip", pl_clip, "Clip id")->required();
  plot->add_option("--out", pl_out, "Output SVG path");
  plot->add_option("--phi-low", pl_low, "Lower threshold line");
  plot->add_option("--phi-hi", pl_hi, "Upper threshold line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth)
      return cmd_synth(synth_out, synth_clips, synth_duration, synth_snr,
                       synth_speech_fraction, synth_fine, seed);
    if (*extract) return cmd_extract(extract_manifests, extract_out);
    if (*train_cmd) {
      if (!tr_config.empty()) apply_train_config_file(tr_config, tcfg);
      return cmd_train(tr_features, tr_train, tr_heldout, tr_ann, tr_out, tr_model,
                       tr_regime, tcfg, lr_opt->count() > 0, bs_opt->count() > 0,
                       tr_channels, tr_tstrides, tr_fstrides, tr_gru, seed);
    }
    if (*infer) return cmd_infer(in_ckpt, in_features, in_out, in_scores, phi_low, phi_hi);
    if (*eval_cmd) return cmd_eval(ev_ref, ev_pred, ev_scores, ev_report);
    if (*plot) return cmd_plot(pl_scores, pl_ref, pl_clip, pl_out, pl_low, pl_hi);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
