#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gpvad/corpus.hpp"
#include "gpvad/features.hpp"
#include "gpvad/tensor.hpp"
#include "gpvad/util.hpp"

namespace gpvad {

constexpr double kPoolEps = 1e-7;   // linear-softmax denominator guard
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

struct CrnnConfig {
  std::vector<int> conv_channels{32, 64, 128};
  double leaky_slope = 0.1;
  double pool_p = 4.0;
  std::vector<int> temporal_pool_strides{2, 2, 1};
  std::vector<int> freq_pool_strides{4, 4, 2};
  int gru_hidden = 128;
  bool bidirectional = true;
  int num_events = 2;
  int mel_bands = 64;
  bool linear_upsample = false;

  void validate() const {
    require(!conv_channels.empty(), "config: need at least one conv block");
    require(conv_channels.size() == temporal_pool_strides.size() &&
                conv_channels.size() == freq_pool_strides.size(),
            "config: stride lists must match conv_channels length");
    int tprod = 1;
    for (int s : temporal_pool_strides) {
      require(s >= 1, "config: strides must be >= 1");
      tprod *= s;
    }
    for (int s : freq_pool_strides) require(s >= 1, "config: strides must be >= 1");
    require(tprod == 4, "config: temporal stride product must be 4");
    require(num_events >= 2, "config: num_events must be >= 2");
    require(gru_hidden >= 1 && mel_bands >= 1, "config: bad dimensions");
    require(pool_p >= 1.0, "config: pool_p must be >= 1");
  }

  int temporal_factor() const {
    int p = 1;
    for (int s : temporal_pool_strides) p *= s;
    return p;
  }

  // frequency size after all pool stages (ceil division per stage)
  int freq_out() const {
    int f = mel_bands;
    for (int s : freq_pool_strides) f = (f + s - 1) / s;
    return f;
  }

  int gru_input_dim() const { return conv_channels.back() * freq_out(); }
  int gru_out_dim() const { return bidirectional ? 2 * gru_hidden : gru_hidden; }
};

template <typename S>
struct ConvBlockParams {
  Tensor<S> bn_gamma, bn_beta;                  // [C_in]
  Tensor<S> bn_running_mean, bn_running_var;    // [C_in]
  Tensor<S> conv_w;                             // [C_out, C_in, 3, 3]
  Tensor<S> conv_b;                             // [C_out]
};

template <typename S>
struct GruDirParams {
  Tensor<S> w_ih;  // [3H, D], gate order r, z, n
  Tensor<S> w_hh;  // [3H, H]
  Tensor<S> b_ih, b_hh;  // [3H]
};

template <typename S>
struct CrnnModel {
  CrnnConfig config;
  LabelVocabulary vocabulary;
  std::vector<ConvBlockParams<S>> blocks;
  GruDirParams<S> gru_fwd, gru_bwd;
  Tensor<S> proj_w;  // [E, gru_out_dim]
  Tensor<S> proj_b;  // [E]

  using Visitor = std::function<void(const std::string&, Tensor<S>&)>;

  // trainable parameters, deterministic order
  void for_each_param(const Visitor& fn) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      fn(p + "bn_gamma", blocks[i].bn_gamma);
      fn(p + "bn_beta", blocks[i].bn_beta);
      fn(p + "conv_w", blocks[i].conv_w);
      fn(p + "conv_b", blocks[i].conv_b);
    }
    fn("gru_fwd.w_ih", gru_fwd.w_ih);
    fn("gru_fwd.w_hh", gru_fwd.w_hh);
    fn("gru_fwd.b_ih", gru_fwd.b_ih);
    fn("gru_fwd.b_hh", gru_fwd.b_hh);
    if (config.bidirectional) {
      fn("gru_bwd.w_ih", gru_bwd.w_ih);
      fn("gru_bwd.w_hh", gru_bwd.w_hh);
      fn("gru_bwd.b_ih", gru_bwd.b_ih);
      fn("gru_bwd.b_hh", gru_bwd.b_hh);
    }
    fn("proj_w", proj_w);
    fn("proj_b", proj_b);
  }

  // all persistent state = trainable params + batch-norm running stats
  void for_each_state(const Visitor& fn) {
    for_each_param(fn);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i) + ".";
      fn(p + "bn_running_mean", blocks[i].bn_running_mean);
      fn(p + "bn_running_var", blocks[i].bn_running_var);
    }
  }

  template <typename T>
  CrnnModel<T> cast() const {
    CrnnModel<T> out;
    out.config = config;
    out.vocabulary = vocabulary;
    for (const auto& b : blocks)
      out.blocks.push_back({b.bn_gamma.template cast<T>(), b.bn_beta.template cast<T>(),
                            b.bn_running_mean.template cast<T>(),
                            b.bn_running_var.template cast<T>(),
                            b.conv_w.template cast<T>(), b.conv_b.template cast<T>()});
    auto cg = [](const GruDirParams<S>& g) {
      return GruDirParams<T>{g.w_ih.template cast<T>(), g.w_hh.template cast<T>(),
                             g.b_ih.template cast<T>(), g.b_hh.template cast<T>()};
    };
    out.gru_fwd = cg(gru_fwd);
    out.gru_bwd = cg(gru_bwd);
    out.proj_w = proj_w.template cast<T>();
    out.proj_b = proj_b.template cast<T>();
    return out;
  }

  CrnnModel<S> zeros_like() const {
    CrnnModel<S> out = *this;
    out.for_each_state([](const std::string&, Tensor<S>& t) { t.fill(S(0)); });
    return out;
  }
};

// ---- initialization ----

namespace detail {

template <typename S>
void uniform_fan_in(Tensor<S>& t, std::size_t fan_in, std::mt19937& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> d(-a, a);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<S>(d(rng));
}

// rows orthonormalized by modified Gram-Schmidt
template <typename S>
void orthogonal_square(Tensor<S>& t, std::size_t n, std::size_t row0,
                       std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (auto& r : rows)
    for (auto& v : r) v = g(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += rows[i][k] * rows[j][k];
      for (std::size_t k = 0; k < n; ++k) rows[i][k] -= dot * rows[j][k];
    }
    double nrm = 0.0;
    for (double v : rows[i]) nrm += v * v;
    nrm = std::sqrt(std::max(nrm, 1e-12));
    for (double& v : rows[i]) v /= nrm;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      t.at(row0 + i, k) = static_cast<S>(rows[i][k]);
}

template <typename S>
void init_gru_dir(GruDirParams<S>& g, int hidden, int input, std::mt19937& rng) {
  const auto H = static_cast<std::size_t>(hidden);
  const auto D = static_cast<std::size_t>(input);
  g.w_ih = Tensor<S>({3 * H, D});
  g.w_hh = Tensor<S>({3 * H, H});
  g.b_ih = Tensor<S>({3 * H});
  g.b_hh = Tensor<S>({3 * H});
  uniform_fan_in(g.w_ih, D, rng);
  for (int gate = 0; gate < 3; ++gate)
    orthogonal_square(g.w_hh, H, static_cast<std::size_t>(gate) * H, rng);
}

}  // namespace detail

template <typename S = float>
CrnnModel<S> init_model(const CrnnConfig& cfg, const LabelVocabulary& vocab,
                        std::uint64_t seed) {
  cfg.validate();
  require(static_cast<int>(vocab.size()) == cfg.num_events,
          "init_model: vocabulary size must equal num_events");
  CrnnModel<S> m;
  m.config = cfg;
  m.vocabulary = vocab;
  std::mt19937 rng = make_rng(seed, 0x30de1);

  int c_in = 1;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    const int c_out = cfg.conv_channels[i];
    ConvBlockParams<S> b;
    const auto ci = static_cast<std::size_t>(c_in);
    const auto co = static_cast<std::size_t>(c_out);
    b.bn_gamma = Tensor<S>({ci});
    b.bn_beta = Tensor<S>({ci});
    b.bn_running_mean = Tensor<S>({ci});
    b.bn_running_var = Tensor<S>({ci});
    b.bn_gamma.fill(S(1));
    b.bn_running_var.fill(S(1));
    b.conv_w = Tensor<S>({co, ci, 3, 3});
    b.conv_b = Tensor<S>({co});
    detail::uniform_fan_in(b.conv_w, ci * 9, rng);
    m.blocks.push_back(std::move(b));
    c_in = c_out;
  }
  detail::init_gru_dir(m.gru_fwd, cfg.gru_hidden, cfg.gru_input_dim(), rng);
  if (cfg.bidirectional)
    detail::init_gru_dir(m.gru_bwd, cfg.gru_hidden, cfg.gru_input_dim(), rng);
  const auto E = static_cast<std::size_t>(cfg.num_events);
  const auto G = static_cast<std::size_t>(cfg.gru_out_dim());
  m.proj_w = Tensor<S>({E, G});
  m.proj_b = Tensor<S>({E});
  detail::uniform_fan_in(m.proj_w, G, rng);
  return m;
}

// ---- standalone spec-level ops ----

template <typename S>
S leaky_relu(S x, S slope) {
  return x >= S(0) ? x : slope * x;
}

// per non-overlapping window W over a T x F matrix: (mean |v|^p)^(1/p),
// output dims by ceil division, edge windows clipped to the tensor.
template <typename S>
Tensor<S> lp_pool(const Tensor<S>& x, int stride_t, int stride_f, double p) {
  require(x.rank() == 2, "lp_pool: expects a T x F matrix");
  require(stride_t >= 1 && stride_f >= 1, "lp_pool: strides must be >= 1");
  require(p >= 1.0, "lp_pool: p must be >= 1");
  const std::size_t T = x.dim(0), F = x.dim(1);
  const std::size_t To = (T + stride_t - 1) / stride_t;
  const std::size_t Fo = (F + stride_f - 1) / stride_f;
  Tensor<S> out({To, Fo});
  for (std::size_t ot = 0; ot < To; ++ot) {
    for (std::size_t of = 0; of < Fo; ++of) {
      double acc = 0.0;
      std::size_t n = 0;
      for (std::size_t t = ot * stride_t; t < std::min(T, (ot + 1) * static_cast<std::size_t>(stride_t)); ++t)
        for (std::size_t f = of * stride_f; f < std::min(F, (of + 1) * static_cast<std::size_t>(stride_f)); ++f) {
          acc += std::pow(std::abs(static_cast<double>(x.at(t, f))), p);
          ++n;
        }
      out.at(ot, of) = static_cast<S>(std::pow(acc / n, 1.0 / p));
    }
  }
  return out;
}

// nearest-neighbor repetition, truncated / last-row padded to target_T
template <typename S>
Tensor<S> upsample_time(const Tensor<S>& x, std::size_t target_t, int factor) {
  require(x.rank() == 2, "upsample_time: expects a T x D matrix");
  require(target_t >= x.dim(0), "upsample_time: target smaller than input");
  require(factor >= 1, "upsample_time: factor must be >= 1");
  const std::size_t T = x.dim(0), D = x.dim(1);
  Tensor<S> out({target_t, D});
  for (std::size_t t = 0; t < target_t; ++t) {
    const std::size_t src = std::min(t / static_cast<std::size_t>(factor), T - 1);
    for (std::size_t d = 0; d < D; ++d) out.at(t, d) = x.at(src, d);
  }
  return out;
}

// Eq.-style clip pooling: y(e) = sum_t y_t(e)^2 / sum_t y_t(e), 0 when the
// denominator falls below kPoolEps.
template <typename S>
std::vector<S> linear_softmax_pool(const Tensor<S>& probs) {
  require(probs.rank() == 2 && probs.dim(0) >= 1, "linear_softmax_pool: T x E input");
  const std::size_t T = probs.dim(0), E = probs.dim(1);
  std::vector<S> out(E, S(0));
  for (std::size_t e = 0; e < E; ++e) {
    double s = 0.0, q = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double v = static_cast<double>(probs.at(t, e));
      s += v;
      q += v * v;
    }
    out[e] = s < kPoolEps ? S(0) : static_cast<S>(q / s);
  }
  return out;
}

// ---- batched forward / backward ----

template <typename S>
struct BlockCache {
  Tensor<S> xhat;        // [B, C_in, T, F] normalized input (training mode)
  Tensor<S> bn_out;      // [B, C_in, T, F] conv input
  Tensor<S> conv_out;    // [B, C_out, T, F] pre-activation
  Tensor<S> pool_out;    // [B, C_out, To, Fo]
  std::vector<double> inv_std;  // per channel, training mode
  std::vector<std::size_t> len_in, len_out;  // valid frames per item
};

template <typename S>
struct GruCache {
  Tensor<S> r, z, n, hn;  // [B, T, H]; hn = recurrent candidate pre-gate
  Tensor<S> h;            // [B, T, H] outputs
};

template <typename S>
struct ForwardContext {
  bool training = false;
  std::vector<std::size_t> lengths;       // input valid frames
  std::vector<std::size_t> small_lengths; // after temporal subsampling
  Tensor<S> input;                        // [B, 1, T, F]
  std::vector<BlockCache<S>> blocks;
  Tensor<S> gru_in;                       // [B, T', D]
  GruCache<S> fwd, bwd;
  Tensor<S> probs_small;                  // [B, T', E] sigmoid outputs
  Tensor<S> probs;                        // [B, T, E] upsampled + masked
  std::vector<S> pool_sum, pool_sq;       // [B*E] clip-pool partials
};

template <typename S>
struct ForwardResult {
  Tensor<S> probs;       // [B, T, E]
  Tensor<S> clip_probs;  // [B, E]
};

namespace detail {

// |v|^p and v^(1/p) with closed forms for the common integer orders; the
// pooling loops touch every activation, where std::pow dominates runtime.
inline double abs_pow_p(double v, double p) {
  const double a = std::abs(v);
  if (p == 4.0) {
    const double a2 = a * a;
    return a2 * a2;
  }
  if (p == 3.0) return a * a * a;
  if (p == 2.0) return a * a;
  if (p == 1.0) return a;
  return std::pow(a, p);
}

inline double root_p(double v, double p) {
  if (p == 4.0) return std::sqrt(std::sqrt(v));
  if (p == 2.0) return std::sqrt(v);
  if (p == 1.0) return v;
  return std::pow(v, 1.0 / p);
}

template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

template <typename S>
void check_finite(const Tensor<S>& t, const char* layer) {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite activation in ") + layer);
}

// batch norm over valid (b, t, f) positions per channel
template <typename S>
void bn_forward(const Tensor<S>& x, ConvBlockParams<S>& p, bool training,
                const std::vector<std::size_t>& len, BlockCache<S>& cache) {
  const std::size_t B = x.dim(0), C = x.dim(1), T = x.dim(2), F = x.dim(3);
  cache.bn_out = Tensor<S>({B, C, T, F});
  if (training) cache.xhat = Tensor<S>({B, C, T, F});
  cache.inv_std.assign(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < len[b]; ++t)
          for (std::size_t f = 0; f < F; ++f) {
            const double v = static_cast<double>(x.at(b, c, t, f));
            sum += v;
            sq += v * v;
            ++n;
          }
      mean = sum / n;
      var = std::max(0.0, sq / n - mean * mean);
      p.bn_running_mean[c] = static_cast<S>((1.0 - kBnMomentum) *
                                            static_cast<double>(p.bn_running_mean[c]) +
                                            kBnMomentum * mean);
      p.bn_running_var[c] = static_cast<S>((1.0 - kBnMomentum) *
                                           static_cast<double>(p.bn_running_var[c]) +
                                           kBnMomentum * var);
    } else {
      mean = static_cast<double>(p.bn_running_mean[c]);
      var = static_cast<double>(p.bn_running_var[c]);
    }
    const double inv = 1.0 / std::sqrt(var + kBnEps);
    cache.inv_std[c] = inv;
    const double g = static_cast<double>(p.bn_gamma[c]);
    const double beta = static_cast<double>(p.bn_beta[c]);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < len[b]; ++t)
        for (std::size_t f = 0; f < F; ++f) {
          const double xh = (static_cast<double>(x.at(b, c, t, f)) - mean) * inv;
          if (training) cache.xhat.at(b, c, t, f) = static_cast<S>(xh);
          cache.bn_out.at(b, c, t, f) = static_cast<S>(g * xh + beta);
        }
    // padded frames stay exactly zero
  }
}

// 3x3 zero-padded convolution via im2col + GEMM, one batch item at a time
template <typename S>
void conv_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& bias,
                  Tensor<S>& out, Tensor<S>& colbuf) {
  const std::size_t B = in.dim(0), C = in.dim(1), T = in.dim(2), F = in.dim(3);
  const std::size_t Co = w.dim(0);
  const std::size_t K = C * 9;
  const std::size_t TF = T * F;
  if (colbuf.size() != K * TF) colbuf = Tensor<S>({K, TF});
  ECMap<S> W(w.data(), static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(K));
  for (std::size_t b = 0; b < B; ++b) {
    S* col = colbuf.data();
    for (std::size_t c = 0; c < C; ++c)
      for (int dt = -1; dt <= 1; ++dt)
        for (int df = -1; df <= 1; ++df) {
          for (std::size_t t = 0; t < T; ++t) {
            const long long ts = static_cast<long long>(t) + dt;
            if (ts < 0 || ts >= static_cast<long long>(T)) {
              for (std::size_t f = 0; f < F; ++f) *col++ = S(0);
              continue;
            }
            const S* src = &in.at(b, c, static_cast<std::size_t>(ts), 0);
            if (df == -1) {
              *col++ = S(0);
              for (std::size_t f = 1; f < F; ++f) *col++ = src[f - 1];
            } else if (df == 1) {
              for (std::size_t f = 0; f + 1 < F; ++f) *col++ = src[f + 1];
              *col++ = S(0);
            } else {
              for (std::size_t f = 0; f < F; ++f) *col++ = src[f];
            }
          }
        }
    ECMap<S> X(colbuf.data(), static_cast<Eigen::Index>(K),
               static_cast<Eigen::Index>(TF));
    EMap<S> Y(&out.at(b, 0, 0, 0), static_cast<Eigen::Index>(Co),
              static_cast<Eigen::Index>(TF));
    Y.noalias() = W * X;
    for (std::size_t co = 0; co < Co; ++co)
      Y.row(static_cast<Eigen::Index>(co)).array() +=
          static_cast<S>(bias[co]);
  }
}

// gradient of conv_forward; rebuilds the im2col buffer per item
template <typename S>
void conv_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& dout,
                   Tensor<S>& din, Tensor<S>& dw, Tensor<S>& db, Tensor<S>& colbuf) {
  const std::size_t B = in.dim(0), C = in.dim(1), T = in.dim(2), F = in.dim(3);
  const std::size_t Co = w.dim(0);
  const std::size_t K = C * 9;
  const std::size_t TF = T * F;
  if (colbuf.size() != K * TF) colbuf = Tensor<S>({K, TF});
  Tensor<S> dcol({K, TF});
  ECMap<S> W(w.data(), static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(K));
  EMap<S> dW(dw.data(), static_cast<Eigen::Index>(Co), static_cast<Eigen::Index>(K));
  din.fill(S(0));
  for (std::size_t b = 0; b < B; ++b) {
    // rebuild X for this item (same packing as conv_forward)
    S* col = colbuf.data();
    for (std::size_t c = 0; c < C; ++c)
      for (int dt = -1; dt <= 1; ++dt)
        for (int df = -1; df <= 1; ++df)
          for (std::size_t t = 0; t < T; ++t) {
            const long long ts = static_cast<long long>(t) + dt;
            if (ts < 0 || ts >= static_cast<long long>(T)) {
              for (std::size_t f = 0; f < F; ++f) *col++ = S(0);
              continue;
            }
            const S* src = &in.at(b, c, static_cast<std::size_t>(ts), 0);
            if (df == -1) {
              *col++ = S(0);
              for (std::size_t f = 1; f < F; ++f) *col++ = src[f - 1];
            } else if (df == 1) {
              for (std::size_t f = 0; f + 1 < F; ++f) *col++ = src[f + 1];
              *col++ = S(0);
            } else {
              for (std::size_t f = 0; f < F; ++f) *col++ = src[f];
            }
          }
    ECMap<S> X(colbuf.data(), static_cast<Eigen::Index>(K),
               static_cast<Eigen::Index>(TF));
    ECMap<S> dY(&dout.at(b, 0, 0, 0), static_cast<Eigen::Index>(Co),
                static_cast<Eigen::Index>(TF));
    dW.noalias() += dY * X.transpose();
    for (std::size_t co = 0; co < Co; ++co)
      db[co] += static_cast<S>(dY.row(static_cast<Eigen::Index>(co)).sum());
    EMap<S> dX(dcol.data(), static_cast<Eigen::Index>(K),
               static_cast<Eigen::Index>(TF));
    dX.noalias() = W.transpose() * dY;
    // col2im accumulate
    const S* dc = dcol.data();
    for (std::size_t c = 0; c < C; ++c)
      for (int dt = -1; dt <= 1; ++dt)
        for (int df = -1; df <= 1; ++df)
          for (std::size_t t = 0; t < T; ++t) {
            const long long ts = static_cast<long long>(t) + dt;
            if (ts < 0 || ts >= static_cast<long long>(T)) {
              dc += F;
              continue;
            }
            S* dst = &din.at(b, c, static_cast<std::size_t>(ts), 0);
            if (df == -1) {
              ++dc;
              for (std::size_t f = 1; f < F; ++f) dst[f - 1] += *dc++;
            } else if (df == 1) {
              for (std::size_t f = 0; f + 1 < F; ++f) dst[f + 1] += *dc++;
              ++dc;
            } else {
              for (std::size_t f = 0; f < F; ++f) dst[f] += *dc++;
            }
          }
  }
}

template <typename S>
void gru_forward_dir(const Tensor<S>& x, const GruDirParams<S>& p, bool reverse,
                     const std::vector<std::size_t>& len, GruCache<S>& cache) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  const std::size_t H = p.w_hh.dim(1);
  cache.r = Tensor<S>({B, T, H});
  cache.z = Tensor<S>({B, T, H});
  cache.n = Tensor<S>({B, T, H});
  cache.hn = Tensor<S>({B, T, H});
  cache.h = Tensor<S>({B, T, H});

  // precompute input projections for all timesteps in one GEMM
  Tensor<S> gi({B, T, 3 * H});
  {
    ECMap<S> X(x.data(), static_cast<Eigen::Index>(B * T),
               static_cast<Eigen::Index>(D));
    ECMap<S> Wi(p.w_ih.data(), static_cast<Eigen::Index>(3 * H),
                static_cast<Eigen::Index>(D));
    EMap<S> Gi(gi.data(), static_cast<Eigen::Index>(B * T),
               static_cast<Eigen::Index>(3 * H));
    Gi.noalias() = X * Wi.transpose();
  }

  Tensor<S> hprev({B, H});
  Tensor<S> gh({B, 3 * H});
  ECMap<S> Wh(p.w_hh.data(), static_cast<Eigen::Index>(3 * H),
              static_cast<Eigen::Index>(H));
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    {
      ECMap<S> Hp(hprev.data(), static_cast<Eigen::Index>(B),
                  static_cast<Eigen::Index>(H));
      EMap<S> Gh(gh.data(), static_cast<Eigen::Index>(B),
                 static_cast<Eigen::Index>(3 * H));
      Gh.noalias() = Hp * Wh.transpose();
    }
    for (std::size_t b = 0; b < B; ++b) {
      const bool valid = t < len[b];
      for (std::size_t k = 0; k < H; ++k) {
        if (!valid) {
          cache.h.at(b, t, k) = S(0);
          hprev.at(b, k) = S(0);
          continue;
        }
        const double bir = static_cast<double>(p.b_ih[k]);
        const double biz = static_cast<double>(p.b_ih[H + k]);
        const double bin = static_cast<double>(p.b_ih[2 * H + k]);
        const double bhr = static_cast<double>(p.b_hh[k]);
        const double bhz = static_cast<double>(p.b_hh[H + k]);
        const double bhn = static_cast<double>(p.b_hh[2 * H + k]);
        const double ar = static_cast<double>(gi.at(b, t, k)) + bir +
                          static_cast<double>(gh.at(b, k)) + bhr;
        const double az = static_cast<double>(gi.at(b, t, H + k)) + biz +
                          static_cast<double>(gh.at(b, H + k)) + bhz;
        const double hn = static_cast<double>(gh.at(b, 2 * H + k)) + bhn;
        const double r = 1.0 / (1.0 + std::exp(-ar));
        const double z = 1.0 / (1.0 + std::exp(-az));
        const double n =
            std::tanh(static_cast<double>(gi.at(b, t, 2 * H + k)) + bin + r * hn);
        const double hp = static_cast<double>(hprev.at(b, k));
        const double h = (1.0 - z) * n + z * hp;
        cache.r.at(b, t, k) = static_cast<S>(r);
        cache.z.at(b, t, k) = static_cast<S>(z);
        cache.n.at(b, t, k) = static_cast<S>(n);
        cache.hn.at(b, t, k) = static_cast<S>(hn);
        cache.h.at(b, t, k) = static_cast<S>(h);
        hprev.at(b, k) = static_cast<S>(h);
      }
    }
  }
}

template <typename S>
void gru_backward_dir(const Tensor<S>& x, const GruDirParams<S>& p, bool reverse,
                      const std::vector<std::size_t>& len, const GruCache<S>& cache,
                      const Tensor<S>& dh_out, Tensor<S>& dx, GruDirParams<S>& g) {
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  const std::size_t H = p.w_hh.dim(1);
  Tensor<S> dh({B, H});   // carried gradient w.r.t. h_t
  Tensor<S> dgi({B, T, 3 * H});  // accumulated input-gate gradients
  Tensor<S> dgh_all({B, T, 3 * H});
  dgi.fill(S(0));
  dgh_all.fill(S(0));

  for (std::size_t step = 0; step < T; ++step) {
    // walk time in the opposite order of the forward pass
    const std::size_t t = reverse ? step : T - 1 - step;
    for (std::size_t b = 0; b < B; ++b) {
      if (t >= len[b]) {
        for (std::size_t k = 0; k < H; ++k) dh.at(b, k) = S(0);
        continue;
      }
      for (std::size_t k = 0; k < H; ++k) {
        const double r = static_cast<double>(cache.r.at(b, t, k));
        const double z = static_cast<double>(cache.z.at(b, t, k));
        const double n = static_cast<double>(cache.n.at(b, t, k));
        const double hn = static_cast<double>(cache.hn.at(b, t, k));
        // previous hidden state in forward-processing order
        double hp = 0.0;
        const bool has_prev = reverse ? (t + 1 < len[b]) : (t >= 1);
        if (has_prev) {
          const std::size_t tp = reverse ? t + 1 : t - 1;
          hp = static_cast<double>(cache.h.at(b, tp, k));
        }
        const double dht = static_cast<double>(dh_out.at(b, t, k)) +
                           static_cast<double>(dh.at(b, k));
        const double dz = dht * (hp - n);
        const double dn = dht * (1.0 - z);
        double dhp = dht * z;
        const double dan = dn * (1.0 - n * n);
        const double dr = dan * hn;
        const double dhn = dan * r;
        const double dar = dr * r * (1.0 - r);
        const double daz = dz * z * (1.0 - z);
        dgi.at(b, t, k) = static_cast<S>(dar);
        dgi.at(b, t, H + k) = static_cast<S>(daz);
        dgi.at(b, t, 2 * H + k) = static_cast<S>(dan);
        dgh_all.at(b, t, k) = static_cast<S>(dar);
        dgh_all.at(b, t, H + k) = static_cast<S>(daz);
        dgh_all.at(b, t, 2 * H + k) = static_cast<S>(dhn);
        dh.at(b, k) = static_cast<S>(dhp);  // W_hh term added below
      }
      // dh_prev += W_hh^T dgh for this (b, t)
      ECMap<S> Wh(p.w_hh.data(), static_cast<Eigen::Index>(3 * H),
                  static_cast<Eigen::Index>(H));
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> dhv(
          &dh.at(b, 0), static_cast<Eigen::Index>(H));
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> dghv(
          &dgh_all.at(b, t, 0), static_cast<Eigen::Index>(3 * H));
      dhv.noalias() += Wh.transpose() * dghv;
      // hidden-to-hidden weight grads need h_prev
      const bool has_prev = reverse ? (t + 1 < len[b]) : (t >= 1);
      if (has_prev) {
        const std::size_t tp = reverse ? t + 1 : t - 1;
        EMap<S> dWh(g.w_hh.data(), static_cast<Eigen::Index>(3 * H),
                    static_cast<Eigen::Index>(H));
        Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> hprev(
            &cache.h.at(b, tp, 0), static_cast<Eigen::Index>(H));
        dWh.noalias() += dghv * hprev.transpose();
      }
      for (std::size_t j = 0; j < 3 * H; ++j) {
        g.b_ih[j] += dgi.at(b, t, j);
        g.b_hh[j] += dgh_all.at(b, t, j);
      }
    }
  }
  // input projections in bulk
  {
    ECMap<S> dGi(dgi.data(), static_cast<Eigen::Index>(B * T),
                 static_cast<Eigen::Index>(3 * H));
    ECMap<S> X(x.data(), static_cast<Eigen::Index>(B * T),
               static_cast<Eigen::Index>(D));
    EMap<S> dWi(g.w_ih.data(), static_cast<Eigen::Index>(3 * H),
                static_cast<Eigen::Index>(D));
    dWi.noalias() += dGi.transpose() * X;
    EMap<S> dX(dx.data(), static_cast<Eigen::Index>(B * T),
               static_cast<Eigen::Index>(D));
    ECMap<S> Wi(p.w_ih.data(), static_cast<Eigen::Index>(3 * H),
                static_cast<Eigen::Index>(D));
    dX.noalias() += dGi * Wi;
  }
}

}  // namespace detail

template <typename S>
ForwardResult<S> forward_batch(CrnnModel<S>& model, const Tensor<S>& feats,
                               const std::vector<std::size_t>& lengths,
                               bool training, ForwardContext<S>* ctx_out = nullptr) {
  model.config.validate();
  require(feats.rank() == 3, "forward: feats must be B x T x F");
  const std::size_t B = feats.dim(0), T0 = feats.dim(1), F0 = feats.dim(2);
  require(F0 == static_cast<std::size_t>(model.config.mel_bands),
          "forward: feature dimension mismatch");
  require(lengths.size() == B, "forward: lengths size mismatch");
  for (std::size_t l : lengths) require(l >= 1 && l <= T0, "forward: bad length");

  ForwardContext<S> local;
  ForwardContext<S>& ctx = ctx_out ? *ctx_out : local;
  ctx = ForwardContext<S>{};
  ctx.training = training;
  ctx.lengths = lengths;

  // input as B x 1 x T x F, padded frames zeroed
  ctx.input = Tensor<S>({B, 1, T0, F0});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < lengths[b]; ++t)
      for (std::size_t f = 0; f < F0; ++f)
        ctx.input.at(b, 0, t, f) = feats.at(b, t, f);

  const CrnnConfig& cfg = model.config;
  std::vector<std::size_t> len = lengths;
  std::size_t T = T0, F = F0;
  const Tensor<S>* cur = &ctx.input;
  Tensor<S> colbuf;
  ctx.blocks.resize(model.blocks.size());
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    auto& bc = ctx.blocks[i];
    bc.len_in = len;
    detail::bn_forward(*cur, model.blocks[i], training, len, bc);
    const std::size_t Co = static_cast<std::size_t>(cfg.conv_channels[i]);
    bc.conv_out = Tensor<S>({B, Co, T, F});
    detail::conv_forward(bc.bn_out, model.blocks[i].conv_w, model.blocks[i].conv_b,
                         bc.conv_out, colbuf);
    detail::check_finite(bc.conv_out, ("conv_block" + std::to_string(i)).c_str());

    const std::size_t st = static_cast<std::size_t>(cfg.temporal_pool_strides[i]);
    const std::size_t sf = static_cast<std::size_t>(cfg.freq_pool_strides[i]);
    const std::size_t To = detail::ceil_div(T, st);
    const std::size_t Fo = detail::ceil_div(F, sf);
    bc.pool_out = Tensor<S>({B, Co, To, Fo});
    const double p = cfg.pool_p;
    const S slope = static_cast<S>(cfg.leaky_slope);
    std::vector<std::size_t> len_out(B);
    for (std::size_t b = 0; b < B; ++b) len_out[b] = detail::ceil_div(len[b], st);
    // windows clipped to each item's valid length so the denominator never
    // depends on the padded extent; pooled frames past the valid range stay 0
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t lt = len[b];
      for (std::size_t c = 0; c < Co; ++c)
        for (std::size_t ot = 0; ot < len_out[b]; ++ot)
          for (std::size_t of = 0; of < Fo; ++of) {
            double acc = 0.0;
            std::size_t cnt = 0;
            const std::size_t tmax = std::min(lt, (ot + 1) * st);
            const std::size_t fmax = std::min(F, (of + 1) * sf);
            for (std::size_t t = ot * st; t < tmax; ++t)
              for (std::size_t f = of * sf; f < fmax; ++f) {
                const double v = static_cast<double>(
                    leaky_relu(bc.conv_out.at(b, c, t, f), slope));
                acc += detail::abs_pow_p(v, p);
                ++cnt;
              }
            bc.pool_out.at(b, c, ot, of) =
                static_cast<S>(detail::root_p(acc / cnt, p));
          }
    }
    bc.len_out = len_out;
    len = std::move(len_out);
    T = To;
    F = Fo;
    cur = &bc.pool_out;
  }

  // flatten frequency into channels: B x T' x (C * F')
  const std::size_t Tp = T;
  const std::size_t C = static_cast<std::size_t>(cfg.conv_channels.back());
  const std::size_t D = C * F;
  ctx.small_lengths = len;
  ctx.gru_in = Tensor<S>({B, Tp, D});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < Tp; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t f = 0; f < F; ++f)
          ctx.gru_in.at(b, t, c * F + f) = cur->at(b, c, t, f);

  detail::gru_forward_dir(ctx.gru_in, model.gru_fwd, false, len, ctx.fwd);
  if (cfg.bidirectional)
    detail::gru_forward_dir(ctx.gru_in, model.gru_bwd, true, len, ctx.bwd);
  detail::check_finite(ctx.fwd.h, "gru");

  // projection + sigmoid
  const std::size_t H = static_cast<std::size_t>(cfg.gru_hidden);
  const std::size_t G = static_cast<std::size_t>(cfg.gru_out_dim());
  const std::size_t E = static_cast<std::size_t>(cfg.num_events);
  ctx.probs_small = Tensor<S>({B, Tp, E});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < len[b]; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        double a = static_cast<double>(model.proj_b[e]);
        for (std::size_t k = 0; k < H; ++k)
          a += static_cast<double>(model.proj_w.at(e, k)) * ctx.fwd.h.at(b, t, k);
        if (cfg.bidirectional)
          for (std::size_t k = 0; k < H; ++k)
            a += static_cast<double>(model.proj_w.at(e, H + k)) * ctx.bwd.h.at(b, t, k);
        ctx.probs_small.at(b, t, e) = static_cast<S>(1.0 / (1.0 + std::exp(-a)));
      }
  (void)G;

  // upsample to the input temporal resolution
  const int factor = cfg.temporal_factor();
  ctx.probs = Tensor<S>({B, T0, E});
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t Lb = len[b];
    for (std::size_t t = 0; t < lengths[b]; ++t) {
      const std::size_t src = std::min(t / static_cast<std::size_t>(factor), Lb - 1);
      for (std::size_t e = 0; e < E; ++e)
        ctx.probs.at(b, t, e) = ctx.probs_small.at(b, src, e);
    }
  }

  // linear-softmax clip pooling over valid frames
  ForwardResult<S> out;
  out.probs = ctx.probs;
  out.clip_probs = Tensor<S>({B, E});
  ctx.pool_sum.assign(B * E, S(0));
  ctx.pool_sq.assign(B * E, S(0));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t e = 0; e < E; ++e) {
      double s = 0.0, q = 0.0;
      for (std::size_t t = 0; t < lengths[b]; ++t) {
        const double v = static_cast<double>(ctx.probs.at(b, t, e));
        s += v;
        q += v * v;
      }
      ctx.pool_sum[b * E + e] = static_cast<S>(s);
      ctx.pool_sq[b * E + e] = static_cast<S>(q);
      out.clip_probs.at(b, e) = s < kPoolEps ? S(0) : static_cast<S>(q / s);
    }
  return out;
}

// Gradients for every trainable parameter given upstream gradients on the
// frame probabilities and/or clip probabilities. Requires a context from a
// training-mode forward pass.
template <typename S>
CrnnModel<S> backward_batch(CrnnModel<S>& model, const ForwardContext<S>& ctx,
                            const Tensor<S>* dprobs, const Tensor<S>* dclip) {
  if (!ctx.training || ctx.input.size() == 0)
    throw std::logic_error("backward: requires a cached training-mode forward pass");
  const CrnnConfig& cfg = model.config;
  const std::size_t B = ctx.input.dim(0);
  const std::size_t T0 = ctx.input.dim(2);
  const std::size_t E = static_cast<std::size_t>(cfg.num_events);
  const std::size_t Tp = ctx.probs_small.dim(1);
  const std::size_t H = static_cast<std::size_t>(cfg.gru_hidden);

  CrnnModel<S> grads = model.zeros_like();

  // d / d probs (B x T0 x E): upstream + clip-pool chain
  Tensor<S> dp({B, T0, E});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < ctx.lengths[b]; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        double g = dprobs ? static_cast<double>(dprobs->at(b, t, e)) : 0.0;
        if (dclip) {
          const double s = static_cast<double>(ctx.pool_sum[b * E + e]);
          if (s >= kPoolEps) {
            const double q = static_cast<double>(ctx.pool_sq[b * E + e]);
            const double y = static_cast<double>(ctx.probs.at(b, t, e));
            g += static_cast<double>(dclip->at(b, e)) * (2.0 * y * s - q) / (s * s);
          }
        }
        dp.at(b, t, e) = static_cast<S>(g);
      }

  // upsample backward: accumulate into the subsampled sequence
  const int factor = cfg.temporal_factor();
  Tensor<S> dps({B, Tp, E});
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t Lb = ctx.small_lengths[b];
    for (std::size_t t = 0; t < ctx.lengths[b]; ++t) {
      const std::size_t src = std::min(t / static_cast<std::size_t>(factor), Lb - 1);
      for (std::size_t e = 0; e < E; ++e)
        dps.at(b, src, e) += dp.at(b, t, e);
    }
  }

  // sigmoid + projection backward
  Tensor<S> dh_fwd({B, Tp, H});
  Tensor<S> dh_bwd({B, Tp, H});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < ctx.small_lengths[b]; ++t)
      for (std::size_t e = 0; e < E; ++e) {
        const double y = static_cast<double>(ctx.probs_small.at(b, t, e));
        const double da = static_cast<double>(dps.at(b, t, e)) * y * (1.0 - y);
        grads.proj_b[e] += static_cast<S>(da);
        for (std::size_t k = 0; k < H; ++k) {
          grads.proj_w.at(e, k) += static_cast<S>(da * ctx.fwd.h.at(b, t, k));
          dh_fwd.at(b, t, k) += static_cast<S>(da * model.proj_w.at(e, k));
        }
        if (cfg.bidirectional)
          for (std::size_t k = 0; k < H; ++k) {
            grads.proj_w.at(e, H + k) += static_cast<S>(da * ctx.bwd.h.at(b, t, k));
            dh_bwd.at(b, t, k) += static_cast<S>(da * model.proj_w.at(e, H + k));
          }
      }

  Tensor<S> dgru_in({B, Tp, ctx.gru_in.dim(2)});
  dgru_in.fill(S(0));
  detail::gru_backward_dir(ctx.gru_in, model.gru_fwd, false, ctx.small_lengths,
                           ctx.fwd, dh_fwd, dgru_in, grads.gru_fwd);
  if (cfg.bidirectional)
    detail::gru_backward_dir(ctx.gru_in, model.gru_bwd, true, ctx.small_lengths,
                             ctx.bwd, dh_bwd, dgru_in, grads.gru_bwd);

  // unflatten to B x C x T' x F'
  const auto& last = ctx.blocks.back();
  const std::size_t Cl = last.pool_out.dim(1);
  const std::size_t Fl = last.pool_out.dim(3);
  Tensor<S> dcur({B, Cl, Tp, Fl});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < Tp; ++t)
      for (std::size_t c = 0; c < Cl; ++c)
        for (std::size_t f = 0; f < Fl; ++f)
          dcur.at(b, c, t, f) = dgru_in.at(b, t, c * Fl + f);

  Tensor<S> colbuf;
  for (std::size_t i = model.blocks.size(); i-- > 0;) {
    const auto& bc = ctx.blocks[i];
    const std::size_t Co = bc.conv_out.dim(1);
    const std::size_t T = bc.conv_out.dim(2);
    const std::size_t F = bc.conv_out.dim(3);
    const std::size_t st = static_cast<std::size_t>(cfg.temporal_pool_strides[i]);
    const std::size_t sf = static_cast<std::size_t>(cfg.freq_pool_strides[i]);
    const std::size_t To = bc.pool_out.dim(2);
    const std::size_t Fo = bc.pool_out.dim(3);
    const double p = cfg.pool_p;
    const S slope = static_cast<S>(cfg.leaky_slope);

    // pool + leaky ReLU backward onto the conv output
    Tensor<S> dconv({B, Co, T, F});
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t lt = bc.len_in[b];
      for (std::size_t c = 0; c < Co; ++c)
        for (std::size_t ot = 0; ot < bc.len_out[b]; ++ot)
          for (std::size_t of = 0; of < Fo; ++of) {
            const double out = static_cast<double>(bc.pool_out.at(b, c, ot, of));
            const double dout = static_cast<double>(dcur.at(b, c, ot, of));
            if (out <= 0.0 || dout == 0.0) continue;
            const std::size_t tmax = std::min(lt, (ot + 1) * st);
            const std::size_t fmax = std::min(F, (of + 1) * sf);
            const std::size_t cnt = (tmax - ot * st) * (fmax - of * sf);
            const double inv_pow =
                p == 4.0 ? 1.0 / (out * out * out) : std::pow(out, 1.0 - p);
            const double scale = dout * inv_pow / cnt;
            for (std::size_t t = ot * st; t < tmax; ++t) {
              for (std::size_t f = of * sf; f < fmax; ++f) {
                const double cv = static_cast<double>(bc.conv_out.at(b, c, t, f));
                const double av = static_cast<double>(leaky_relu(bc.conv_out.at(b, c, t, f), slope));
                double dv = scale * detail::abs_pow_p(av, p - 1.0) *
                            (av >= 0.0 ? 1.0 : -1.0);
                if (cv < 0.0) dv *= static_cast<double>(slope);
                dconv.at(b, c, t, f) += static_cast<S>(dv);
              }
            }
          }
      (void)To;
    }

    // conv backward
    const std::size_t Ci = bc.bn_out.dim(1);
    Tensor<S> dbn({B, Ci, T, F});
    detail::conv_backward(bc.bn_out, model.blocks[i].conv_w, dconv, dbn,
                          grads.blocks[i].conv_w, grads.blocks[i].conv_b, colbuf);

    // batch-norm backward (training statistics over valid positions)
    Tensor<S> din({B, Ci, T, F});
    for (std::size_t c = 0; c < Ci; ++c) {
      double sum_dy_xhat = 0.0, sum_dy = 0.0;
      std::size_t n = 0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < bc.len_in[b]; ++t)
          for (std::size_t f = 0; f < F; ++f) {
            const double dy = static_cast<double>(dbn.at(b, c, t, f));
            const double xh = static_cast<double>(bc.xhat.at(b, c, t, f));
            sum_dy += dy;
            sum_dy_xhat += dy * xh;
            ++n;
          }
      grads.blocks[i].bn_beta[c] += static_cast<S>(sum_dy);
      grads.blocks[i].bn_gamma[c] += static_cast<S>(sum_dy_xhat);
      const double g = static_cast<double>(model.blocks[i].bn_gamma[c]);
      const double inv = bc.inv_std[c];
      const double mean_dy = sum_dy / n;
      const double mean_dy_xhat = sum_dy_xhat / n;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < bc.len_in[b]; ++t)
          for (std::size_t f = 0; f < F; ++f) {
            const double dy = static_cast<double>(dbn.at(b, c, t, f));
            const double xh = static_cast<double>(bc.xhat.at(b, c, t, f));
            din.at(b, c, t, f) =
                static_cast<S>(g * inv * (dy - mean_dy - xh * mean_dy_xhat));
          }
    }
    dcur = std::move(din);
  }
  return grads;
}

// ---- single-clip wrappers (inference path, batch size 1) ----

struct ProbSequence {
  Tensor<float> values;  // T x E
  double frame_hop_s = 0.020;
  LabelVocabulary vocabulary;
};

template <typename S>
std::pair<ProbSequence, std::vector<S>> forward(CrnnModel<S>& model,
                                                const FeatureMatrix& feats,
                                                bool training = false) {
  Tensor<S> batch({1, feats.frames(), feats.bands()});
  for (std::size_t t = 0; t < feats.frames(); ++t)
    for (std::size_t f = 0; f < feats.bands(); ++f)
      batch.at(0, t, f) = static_cast<S>(feats.values.at(t, f));
  auto res = forward_batch(model, batch, {feats.frames()}, training);
  ProbSequence seq;
  seq.frame_hop_s = feats.frame_hop_s;
  seq.vocabulary = model.vocabulary;
  seq.values = Tensor<float>({feats.frames(), res.probs.dim(2)});
  for (std::size_t t = 0; t < feats.frames(); ++t)
    for (std::size_t e = 0; e < res.probs.dim(2); ++e)
      seq.values.at(t, e) = static_cast<float>(res.probs.at(0, t, e));
  std::vector<S> clip(res.clip_probs.dim(1));
  for (std::size_t e = 0; e < clip.size(); ++e) clip[e] = res.clip_probs.at(0, e);
  return {std::move(seq), std::move(clip)};
}

}  // namespace gpvad
