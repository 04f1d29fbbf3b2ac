#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gpvad/checkpoint.hpp"
#include "gpvad/corpus.hpp"
#include "gpvad/features.hpp"
#include "gpvad/model.hpp"
#include "gpvad/postprocess.hpp"
#include "gpvad/util.hpp"

namespace gpvad {

constexpr double kBceEps = 1e-7;

enum class Regime { clip_level, frame_level };
enum class Optimizer { adam, sgd };

struct TrainConfig {
  Regime regime = Regime::clip_level;
  std::size_t batch_size = 64;   // paper defaults: 64 clip-level, 20 frame-level
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-4;   // 1e-5 for SGD frame-level
  int early_stop_patience = 7;
  int max_epochs = 100;
  std::uint64_t seed = 42;

  void validate() const {
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(learning_rate > 0.0, "train: learning_rate must be positive");
    require(early_stop_patience >= 1, "train: patience must be >= 1");
    require(max_epochs >= 1, "train: max_epochs must be >= 1");
  }
};

// ---- loss ----

template <typename S>
struct LossResult {
  double loss = 0.0;
  std::size_t terms = 0;
  Tensor<S> grad;  // d loss / d predictions, same shape as predictions
};

// Mean binary cross-entropy over unmasked terms; predictions clamped to
// [eps, 1-eps] before the logs.
template <typename S>
LossResult<S> bce_loss(const Tensor<S>& predictions, const Tensor<S>& targets,
                       const Tensor<std::uint8_t>* mask = nullptr) {
  require(predictions.shape() == targets.shape(), "bce_loss: shape mismatch");
  LossResult<S> out;
  out.grad = Tensor<S>(predictions.shape());
  std::size_t n = 0;
  if (mask) {
    // mask covers the leading dims; trailing dim is the event axis
    require(predictions.size() % mask->size() == 0, "bce_loss: mask shape mismatch");
    const std::size_t stride = predictions.size() / mask->size();
    for (std::size_t i = 0; i < mask->size(); ++i)
      if ((*mask)[i]) n += stride;
  } else {
    n = predictions.size();
  }
  if (n == 0) throw std::domain_error("bce_loss: every term is masked");

  double acc = 0.0;
  const std::size_t stride = mask ? predictions.size() / mask->size() : predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (mask && !(*mask)[i / stride]) continue;
    const double t = static_cast<double>(targets[i]);
    double y = static_cast<double>(predictions[i]);
    y = std::min(1.0 - kBceEps, std::max(kBceEps, y));
    acc += -(t * std::log(y) + (1.0 - t) * std::log(1.0 - y));
    out.grad[i] = static_cast<S>(-(t / y - (1.0 - t) / (1.0 - y)) / static_cast<double>(n));
  }
  out.loss = acc / static_cast<double>(n);
  out.terms = n;
  return out;
}

// ---- optimizers ----

template <typename S>
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Tensor<S>> m, v;
};

template <typename S>
void sgd_step(CrnnModel<S>& model, CrnnModel<S>& grads, double lr) {
  std::map<std::string, Tensor<S>*> gmap;
  grads.for_each_param([&](const std::string& n, Tensor<S>& t) { gmap[n] = &t; });
  model.for_each_param([&](const std::string& name, Tensor<S>& p) {
    Tensor<S>& g = *gmap.at(name);
    if (!g.all_finite()) throw NumericError("non-finite gradient for " + name);
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] -= static_cast<S>(lr * static_cast<double>(g[i]));
  });
}

template <typename S>
void adam_step(CrnnModel<S>& model, CrnnModel<S>& grads, AdamState<S>& state,
               double lr) {
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::map<std::string, Tensor<S>*> gmap;
  grads.for_each_param([&](const std::string& n, Tensor<S>& t) { gmap[n] = &t; });
  model.for_each_param([&](const std::string& name, Tensor<S>& p) {
    Tensor<S>& g = *gmap.at(name);
    if (!g.all_finite()) throw NumericError("non-finite gradient for " + name);
    auto& m = state.m.try_emplace(name, Tensor<S>(p.shape())).first->second;
    auto& v = state.v.try_emplace(name, Tensor<S>(p.shape())).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      p[i] -= static_cast<S>(lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  });
}

// ---- data ----

struct TrainClip {
  std::string clip_id;
  FeatureMatrix features;
  std::vector<float> clip_targets;  // E, multi-hot
  Tensor<float> frame_targets;      // T x E
  std::set<std::string> labels;
};

inline std::vector<TrainClip> load_dataset(
    const std::vector<ClipRecord>& manifest,
    const std::vector<FrameAnnotation>& annotations,
    const std::map<std::string, std::string>& feature_paths,
    const LabelVocabulary& vocab) {
  std::map<std::string, std::vector<FrameAnnotation>> by_clip;
  for (const auto& a : annotations) by_clip[a.clip_id].push_back(a);

  std::vector<TrainClip> out;
  for (const auto& rec : manifest) {
    auto it = feature_paths.find(rec.clip_id);
    if (it == feature_paths.end())
      throw DataError("no features for clip " + rec.clip_id);
    TrainClip c;
    c.clip_id = rec.clip_id;
    c.features = read_feature_file(it->second);
    c.labels = rec.clip_labels;
    c.clip_targets.assign(vocab.size(), 0.0f);
    for (const auto& l : rec.clip_labels) c.clip_targets[vocab.index_of(l)] = 1.0f;
    const std::size_t T = c.features.frames();
    c.frame_targets = Tensor<float>({T, vocab.size()});
    for (const auto& a : by_clip[rec.clip_id]) {
      if (std::find(vocab.names.begin(), vocab.names.end(), a.event_label) ==
          vocab.names.end())
        continue;
      const std::size_t e = vocab.index_of(a.event_label);
      auto bin = segments_to_binary({{a.onset_s, a.offset_s}}, T, c.features.frame_hop_s);
      for (std::size_t t = 0; t < T; ++t)
        if (bin[t]) c.frame_targets.at(t, e) = 1.0f;
    }
    out.push_back(std::move(c));
  }
  return out;
}

// Per-label round-robin batches with per-label shuffling; the per-batch
// label counts differ by at most one.
class BalancedBatchSampler {
public:
  BalancedBatchSampler(const std::vector<TrainClip>& clips,
                       const LabelVocabulary& vocab, std::size_t batch_size,
                       std::uint64_t seed)
      : batch_size_(batch_size), seed_(seed), total_(clips.size()) {
    require(!clips.empty(), "sampler: empty manifest");
    require(batch_size >= 1, "sampler: batch_size must be >= 1");
    for (const auto& name : vocab.names) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < clips.size(); ++i)
        if (clips[i].labels.count(name)) members.push_back(i);
      if (!members.empty()) per_label_.push_back(std::move(members));
    }
    require(!per_label_.empty(), "sampler: no labelled clips");
  }

  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const {
    std::vector<std::vector<std::size_t>> pools = per_label_;
    std::vector<std::size_t> cursor(pools.size(), 0);
    for (std::size_t l = 0; l < pools.size(); ++l) {
      auto rng = make_rng(seed_, mix_seed(epoch + 1, l));
      std::shuffle(pools[l].begin(), pools[l].end(), rng);
    }
    std::vector<std::size_t> order;
    order.reserve(total_);
    std::size_t l = 0;
    while (order.size() < total_) {
      auto& pool = pools[l];
      auto& cur = cursor[l];
      if (cur >= pool.size()) {
        auto rng = make_rng(seed_, mix_seed(epoch + 1, 1000 + l + cur));
        std::shuffle(pool.begin(), pool.end(), rng);
        cur = 0;
      }
      order.push_back(pool[cur++]);
      l = (l + 1) % pools.size();
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += batch_size_)
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                           order.begin() + static_cast<std::ptrdiff_t>(
                                               std::min(order.size(), i + batch_size_)));
    return batches;
  }

private:
  std::vector<std::vector<std::size_t>> per_label_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t total_;
};

struct Batch {
  Tensor<float> features;        // B x T_max x F, zero-padded
  std::vector<std::size_t> lengths;
  Tensor<float> clip_targets;    // B x E
  Tensor<float> frame_targets;   // B x T_max x E, zero-padded
  Tensor<std::uint8_t> mask;     // B x T_max, 1 on valid frames
};

inline Batch make_batch(const std::vector<TrainClip>& clips,
                        const std::vector<std::size_t>& idx) {
  require(!idx.empty(), "make_batch: empty index list");
  const std::size_t B = idx.size();
  const std::size_t F = clips[idx[0]].features.bands();
  const std::size_t E = clips[idx[0]].clip_targets.size();
  std::size_t tmax = 0;
  for (std::size_t i : idx) tmax = std::max(tmax, clips[i].features.frames());
  Batch b;
  b.features = Tensor<float>({B, tmax, F});
  b.clip_targets = Tensor<float>({B, E});
  b.frame_targets = Tensor<float>({B, tmax, E});
  b.mask = Tensor<std::uint8_t>({B, tmax});
  b.lengths.resize(B);
  for (std::size_t k = 0; k < B; ++k) {
    const TrainClip& c = clips[idx[k]];
    const std::size_t T = c.features.frames();
    b.lengths[k] = T;
    for (std::size_t t = 0; t < T; ++t) {
      b.mask.at(k, t) = 1;
      for (std::size_t f = 0; f < F; ++f)
        b.features.at(k, t, f) = c.features.values.at(t, f);
      for (std::size_t e = 0; e < E; ++e)
        b.frame_targets.at(k, t, e) = c.frame_targets.at(t, e);
    }
    for (std::size_t e = 0; e < E; ++e)
      b.clip_targets.at(k, e) = c.clip_targets[e];
  }
  return b;
}

// ---- early stopping (strict decrease, paper patience rule) ----

class EarlyStopper {
public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // returns true when training should stop after this observation
  bool observe(double heldout_loss) {
    ++epoch_;
    if (heldout_loss < best_loss_) {
      best_loss_ = heldout_loss;
      best_epoch_ = epoch_;
      since_ = 0;
    } else {
      ++since_;
    }
    return since_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

private:
  int patience_;
  int epoch_ = 0;
  int since_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
};

// ---- training loop ----

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double heldout_loss = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  CrnnModel<float> best_model;
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  bool diverged = false;
};

inline void write_train_log(const std::string& path,
                            const std::vector<EpochRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write training log: " + path);
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["heldout_loss"] = r.heldout_loss;
    j["lr"] = r.lr;
    j["seconds"] = r.seconds;
    out << j.dump() << '\n';
  }
}

namespace detail {

// loss over a set of clips without gradient bookkeeping (eval-mode forward)
inline double dataset_loss(CrnnModel<float>& model, const std::vector<TrainClip>& clips,
                           Regime regime, std::size_t batch_size) {
  double acc = 0.0;
  std::size_t terms = 0;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    idx.push_back(i);
    if (idx.size() == batch_size || i + 1 == clips.size()) {
      Batch b = make_batch(clips, idx);
      auto res = forward_batch(model, b.features, b.lengths, /*training=*/false);
      if (regime == Regime::clip_level) {
        auto l = bce_loss(res.clip_probs, b.clip_targets);
        acc += l.loss * static_cast<double>(l.terms);
        terms += l.terms;
      } else {
        auto l = bce_loss(res.probs, b.frame_targets, &b.mask);
        acc += l.loss * static_cast<double>(l.terms);
        terms += l.terms;
      }
      idx.clear();
    }
  }
  return acc / static_cast<double>(std::max<std::size_t>(1, terms));
}

}  // namespace detail

inline TrainResult train(CrnnModel<float> model, const std::vector<TrainClip>& train_clips,
                         const std::vector<TrainClip>& heldout_clips,
                         const TrainConfig& cfg) {
  cfg.validate();
  require(!train_clips.empty() && !heldout_clips.empty(),
          "train: need non-empty train and held-out splits");

  BalancedBatchSampler sampler(train_clips, model.vocabulary, cfg.batch_size, cfg.seed);
  AdamState<float> adam;
  EarlyStopper stopper(cfg.early_stop_patience);
  TrainResult result;
  result.best_model = model;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double train_acc = 0.0;
    std::size_t train_terms = 0;
    std::vector<std::vector<std::size_t>> batches;
    if (cfg.regime == Regime::clip_level) {
      batches = sampler.epoch_batches(static_cast<std::size_t>(epoch));
    } else {
      std::vector<std::size_t> order(train_clips.size());
      std::iota(order.begin(), order.end(), 0);
      auto rng = make_rng(cfg.seed, mix_seed(0xf7a, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < order.size(); i += cfg.batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() + static_cast<std::ptrdiff_t>(
                                                 std::min(order.size(), i + cfg.batch_size)));
    }

    bool diverged = false;
    for (const auto& bidx : batches) {
      Batch b = make_batch(train_clips, bidx);
      ForwardContext<float> ctx;
      auto res = forward_batch(model, b.features, b.lengths, /*training=*/true, &ctx);
      CrnnModel<float> grads;
      double loss;
      std::size_t terms;
      if (cfg.regime == Regime::clip_level) {
        auto l = bce_loss(res.clip_probs, b.clip_targets);
        loss = l.loss;
        terms = l.terms;
        grads = backward_batch(model, ctx, static_cast<const Tensor<float>*>(nullptr), &l.grad);
      } else {
        auto l = bce_loss(res.probs, b.frame_targets, &b.mask);
        loss = l.loss;
        terms = l.terms;
        grads = backward_batch(model, ctx, &l.grad, static_cast<const Tensor<float>*>(nullptr));
      }
      if (!std::isfinite(loss)) {
        diverged = true;
        break;
      }
      train_acc += loss * static_cast<double>(terms);
      train_terms += terms;
      if (cfg.optimizer == Optimizer::adam)
        adam_step(model, grads, adam, cfg.learning_rate);
      else
        sgd_step(model, grads, cfg.learning_rate);
    }
    if (diverged) {
      result.diverged = true;
      break;
    }

    const double heldout =
        detail::dataset_loss(model, heldout_clips, cfg.regime, cfg.batch_size);
    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_acc / static_cast<double>(std::max<std::size_t>(1, train_terms));
    rec.heldout_loss = heldout;
    rec.lr = cfg.learning_rate;
    rec.seconds = std::chrono::duration<double>(t1 - t0).count();
    result.log.push_back(rec);

    if (!std::isfinite(heldout)) {
      result.diverged = true;
      break;
    }
    const bool improved = heldout < stopper.best_loss();
    const bool stop = stopper.observe(heldout);
    if (improved) {
      result.best_model = model;
      result.best_epoch = epoch;
    }
    if (stop) break;
  }
  if (result.best_epoch == 0) result.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace gpvad
