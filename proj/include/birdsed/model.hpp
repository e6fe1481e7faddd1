#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "birdsed/common.hpp"
#include "birdsed/kernels.hpp"

namespace birdsed {

inline constexpr int kConvKernel = 3;

// Small from-scratch backbone: per block a 3x3 same-padded conv, silu, and a
// 2x2 average pool. Input is a single-channel spectrogram.
struct BackboneConfig {
  std::vector<int> channels = {16, 32, 64};

  void validate() const;
  int n_blocks() const { return static_cast<int>(channels.size()); }
  int feature_channels() const { return channels.back(); }

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

// p = 1 reduces to mean pooling; large p approaches max pooling.
struct GeMConfig {
  double p = 3.0;
  double eps = 1e-6;
  bool trainable = false;

  void validate() const;

  friend bool operator==(const GeMConfig&, const GeMConfig&) = default;
};

template <typename T>
struct ConvLayerT {
  int in_c = 0;
  int out_c = 0;
  std::vector<T> weight;  // [out_c][in_c][3][3]
  std::vector<T> bias;    // [out_c]
};

template <typename T>
struct BackboneT {
  std::vector<ConvLayerT<T>> blocks;
};

template <typename T>
struct BirdModelT {
  BackboneConfig config;
  GeMConfig gem;
  int n_classes = 0;
  BackboneT<T> backbone;
  T gem_p = T(3);
  std::vector<T> head_weight;  // [n_classes][feature_channels]
  std::vector<T> head_bias;    // [n_classes]
};

template <typename T>
struct BinaryModelT {
  BackboneConfig config;
  BackboneT<T> backbone;
  std::vector<T> attn_weight;  // [feature_channels]
  std::vector<T> head_weight;  // [feature_channels]
  T head_bias = T(0);
};

using BirdModel = BirdModelT<float>;
using BinaryModel = BinaryModelT<float>;

BirdModel init_bird_model(const BackboneConfig& config, const GeMConfig& gem, int n_classes,
                          std::uint64_t seed);
BinaryModel init_binary_model(const BackboneConfig& config, std::uint64_t seed);

// Versioned binary checkpoint: magic, config digest, then every tensor in
// declaration order as little-endian f32 with a shape header.
void save_bird_model(const std::filesystem::path& path, const BirdModel& m);
BirdModel load_bird_model(const std::filesystem::path& path);
void save_binary_model(const std::filesystem::path& path, const BinaryModel& m);
BinaryModel load_binary_model(const std::filesystem::path& path);

// Generalized mean over all positions of each channel:
// (mean over positions of clamp(x, eps)^p)^(1/p), computed in a
// max-factored form so large p stays finite.
template <typename T>
std::vector<T> gem_pool(const T* features, int channels, std::size_t positions, double p,
                        double eps);

std::vector<float> gem_pool(const Mat<float>& per_channel_maps, int channels,
                            const GeMConfig& cfg);

// ---------------------------------------------------------------------------
// Forward/backward graph. Templated so training runs in float while the
// finite-difference checks run the identical graph in double.

template <typename T>
struct BackboneTrace {
  int n_images = 0;
  std::vector<int> h;                  // input height per block; h[i] feeds block i
  std::vector<int> w;
  std::vector<std::vector<T>> input;   // input[i] feeds block i; input[n_blocks] = features
  std::vector<std::vector<T>> pre;     // pre-activation conv output per block

  const std::vector<T>& features() const { return input.back(); }
  int feature_h() const { return h.back(); }
  int feature_w() const { return w.back(); }
};

// Each image is standardized to zero mean, unit variance before the first
// conv: dB spectrograms sit around -60 +- 40, which a fresh backbone without
// normalization layers cannot digest. Constant images map to zero. This is
// the graph entry, so no gradient flows through the statistics.
template <typename T>
void standardize_images(std::vector<T>& images, int n_images) {
  const std::size_t per = images.size() / n_images;
#pragma omp parallel for schedule(static)
  for (int s = 0; s < n_images; ++s) {
    T* x = images.data() + static_cast<std::size_t>(s) * per;
    double mean = 0.0;
    for (std::size_t i = 0; i < per; ++i) mean += x[i];
    mean /= static_cast<double>(per);
    double var = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = x[i] - mean;
      var += d * d;
    }
    const double scale = 1.0 / (std::sqrt(var / static_cast<double>(per)) + 1e-6);
    for (std::size_t i = 0; i < per; ++i) {
      x[i] = static_cast<T>((x[i] - mean) * scale);
    }
  }
}

template <typename T>
void backbone_forward(const BackboneT<T>& bb, std::vector<T> images, int n_images, int h, int w,
                      BackboneTrace<T>& tr) {
  const int n_blocks = static_cast<int>(bb.blocks.size());
  tr.n_images = n_images;
  tr.h.assign(1, h);
  tr.w.assign(1, w);
  tr.input.clear();
  tr.pre.assign(n_blocks, {});
  tr.input.reserve(n_blocks + 1);
  standardize_images(images, n_images);
  tr.input.push_back(std::move(images));

  int ch = h, cw = w;
  for (int i = 0; i < n_blocks; ++i) {
    const ConvLayerT<T>& L = bb.blocks[i];
    if (ch < 2 || cw < 2) {
      throw DataError("backbone: input too small for block " + std::to_string(i) +
                      " downsampling (" + std::to_string(ch) + "x" + std::to_string(cw) + ")");
    }
    std::vector<T>& pre = tr.pre[i];
    pre.resize(static_cast<std::size_t>(n_images) * L.out_c * ch * cw);
    kernels::conv2d_forward(tr.input[i].data(), n_images, L.in_c, ch, cw, L.weight.data(),
                            L.bias.data(), L.out_c, kConvKernel, pre.data());
    std::vector<T> act(pre.size());
    kernels::silu_forward(pre.data(), act.data(), pre.size());
    const int ph = ch / 2, pw = cw / 2;
    std::vector<T> pooled(static_cast<std::size_t>(n_images) * L.out_c * ph * pw);
    kernels::avgpool2_forward(act.data(), n_images * L.out_c, ch, cw, pooled.data());
    tr.input.push_back(std::move(pooled));
    ch = ph;
    cw = pw;
    tr.h.push_back(ch);
    tr.w.push_back(cw);
  }
}

// dfeatures is consumed. Parameter gradients are written (not accumulated)
// into grads, which must already have the model's shapes.
template <typename T>
void backbone_backward(const BackboneT<T>& bb, const BackboneTrace<T>& tr,
                       std::vector<T> dfeatures, BackboneT<T>& grads) {
  const int n_blocks = static_cast<int>(bb.blocks.size());
  std::vector<T> dout = std::move(dfeatures);
  for (int i = n_blocks - 1; i >= 0; --i) {
    const ConvLayerT<T>& L = bb.blocks[i];
    const int h = tr.h[i], w = tr.w[i];
    const std::size_t conv_size = static_cast<std::size_t>(tr.n_images) * L.out_c * h * w;

    std::vector<T> dact(conv_size);
    kernels::avgpool2_backward(dout.data(), tr.n_images * L.out_c, h, w, dact.data());
    std::vector<T> dpre(conv_size);
    kernels::silu_backward(tr.pre[i].data(), dact.data(), dpre.data(), conv_size);
    kernels::conv2d_backward_params(tr.input[i].data(), dpre.data(), tr.n_images, L.in_c, h, w,
                                    L.out_c, kConvKernel, grads.blocks[i].weight.data(),
                                    grads.blocks[i].bias.data());
    if (i > 0) {
      std::vector<T> din(static_cast<std::size_t>(tr.n_images) * L.in_c * h * w);
      kernels::conv2d_backward_input(dpre.data(), tr.n_images, L.in_c, h, w, L.weight.data(),
                                     L.out_c, kConvKernel, din.data());
      dout = std::move(din);
    }
  }
}

template <typename T>
std::vector<T> gem_pool(const T* features, int channels, std::size_t positions, double p,
                        double eps) {
  if (channels < 1 || positions < 1) throw DataError("gem_pool: empty input");
  if (p < 1.0) throw ConfigError("gem_pool: p must be >= 1");
  std::vector<T> out(channels);
  const std::size_t stride = positions;
  for (int c = 0; c < channels; ++c) {
    const T* x = features + static_cast<std::size_t>(c) * stride;
    T mx = static_cast<T>(eps);
    for (std::size_t i = 0; i < positions; ++i) mx = std::max(mx, x[i]);
    T acc = T(0);
    for (std::size_t i = 0; i < positions; ++i) {
      const T r = std::max(x[i], static_cast<T>(eps)) / mx;
      acc += std::pow(r, static_cast<T>(p));
    }
    const T mean_rp = acc / static_cast<T>(positions);
    out[c] = mx * std::pow(mean_rp, static_cast<T>(1.0 / p));
  }
  return out;
}

namespace detail {

// GeM over the features of a group of maps (the six time segments of one
// recording, or a single inference segment). Positions are iterated
// segment-major, which equals pooling the time-concatenated feature map.
template <typename T>
struct GemGroupTrace {
  std::vector<T> max_c;     // [groups][C]
  std::vector<T> mean_rp;   // [groups][C]
  std::vector<T> pooled;    // [groups][C]
};

template <typename T>
void gem_group_forward(const BackboneTrace<T>& tr, int groups, int maps_per_group, double p,
                       double eps, GemGroupTrace<T>& g) {
  const int C =
      static_cast<int>(tr.features().size() / (static_cast<std::size_t>(tr.n_images) *
                                               tr.feature_h() * tr.feature_w()));
  const std::size_t map_size = static_cast<std::size_t>(tr.feature_h()) * tr.feature_w();
  const std::size_t n_pos = static_cast<std::size_t>(maps_per_group) * map_size;
  g.max_c.assign(static_cast<std::size_t>(groups) * C, T(0));
  g.mean_rp.assign(static_cast<std::size_t>(groups) * C, T(0));
  g.pooled.assign(static_cast<std::size_t>(groups) * C, T(0));
  const T* feat = tr.features().data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < groups; ++b) {
    for (int c = 0; c < C; ++c) {
      T mx = static_cast<T>(eps);
      for (int s = 0; s < maps_per_group; ++s) {
        const T* x = feat + ((static_cast<std::size_t>(b) * maps_per_group + s) * C + c) * map_size;
        for (std::size_t i = 0; i < map_size; ++i) mx = std::max(mx, x[i]);
      }
      T acc = T(0);
      for (int s = 0; s < maps_per_group; ++s) {
        const T* x = feat + ((static_cast<std::size_t>(b) * maps_per_group + s) * C + c) * map_size;
        for (std::size_t i = 0; i < map_size; ++i) {
          const T r = std::max(x[i], static_cast<T>(eps)) / mx;
          acc += std::pow(r, static_cast<T>(p));
        }
      }
      const T mean_rp = acc / static_cast<T>(n_pos);
      g.max_c[static_cast<std::size_t>(b) * C + c] = mx;
      g.mean_rp[static_cast<std::size_t>(b) * C + c] = mean_rp;
      g.pooled[static_cast<std::size_t>(b) * C + c] =
          mx * std::pow(mean_rp, static_cast<T>(1.0 / p));
    }
  }
}

// dpooled -> dfeatures; optionally accumulates d(loss)/d(p) for trainable p.
template <typename T>
void gem_group_backward(const BackboneTrace<T>& tr, int groups, int maps_per_group, double p,
                        double eps, const GemGroupTrace<T>& g, const T* dpooled, T* dfeatures,
                        T* dp_accum) {
  const int C =
      static_cast<int>(tr.features().size() / (static_cast<std::size_t>(tr.n_images) *
                                               tr.feature_h() * tr.feature_w()));
  const std::size_t map_size = static_cast<std::size_t>(tr.feature_h()) * tr.feature_w();
  const std::size_t n_pos = static_cast<std::size_t>(maps_per_group) * map_size;
  const T* feat = tr.features().data();
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < groups; ++b) {
    for (int c = 0; c < C; ++c) {
      const std::size_t bc = static_cast<std::size_t>(b) * C + c;
      const T mx = g.max_c[bc];
      const T mean_rp = g.mean_rp[bc];
      // d(out)/d(x_i) = mean_rp^((1-p)/p) * r_i^(p-1) / n_pos for x_i > eps
      const T scale = dpooled[bc] *
                      std::pow(mean_rp, static_cast<T>((1.0 - p) / p)) / static_cast<T>(n_pos);
      for (int s = 0; s < maps_per_group; ++s) {
        const std::size_t off =
            ((static_cast<std::size_t>(b) * maps_per_group + s) * C + c) * map_size;
        const T* x = feat + off;
        T* dx = dfeatures + off;
        for (std::size_t i = 0; i < map_size; ++i) {
          dx[i] = x[i] > static_cast<T>(eps)
                      ? scale * std::pow(x[i] / mx, static_cast<T>(p - 1.0))
                      : T(0);
        }
      }
    }
  }
  if (dp_accum != nullptr) {
    // d(out)/d(p) = out * (s/p - ln(mean_rp)/p^2), s = sum r^p ln r / sum r^p
    T acc = T(0);
    for (int b = 0; b < groups; ++b) {
      for (int c = 0; c < C; ++c) {
        const std::size_t bc = static_cast<std::size_t>(b) * C + c;
        const T mx = g.max_c[bc];
        T num = T(0), den = T(0);
        for (int s = 0; s < maps_per_group; ++s) {
          const T* x =
              feat + ((static_cast<std::size_t>(b) * maps_per_group + s) * C + c) * map_size;
          for (std::size_t i = 0; i < map_size; ++i) {
            const T r = std::max(x[i], static_cast<T>(eps)) / mx;
            const T rp = std::pow(r, static_cast<T>(p));
            num += rp * std::log(r);
            den += rp;
          }
        }
        const T s_bc = num / den;
        acc += dpooled[bc] * g.pooled[bc] *
               (s_bc / static_cast<T>(p) -
                std::log(g.mean_rp[bc]) / static_cast<T>(p * p));
      }
    }
    *dp_accum += acc;
  }
}

}  // namespace detail

template <typename T>
struct BirdForwardTrace {
  BackboneTrace<T> backbone;
  detail::GemGroupTrace<T> gem;
  int batch = 0;
  int segments_per = 1;
  std::vector<T> logits;  // [batch][n_classes]
};

// segments laid out [batch * segments_per][1][mel][frames]. The six feature
// maps of one recording are pooled jointly, which equals time-concatenation
// followed by GeM over time and frequency.
template <typename T>
void forward_bird(const BirdModelT<T>& m, std::vector<T> segments, int batch, int segments_per,
                  int mel, int frames, BirdForwardTrace<T>& tr) {
  tr.batch = batch;
  tr.segments_per = segments_per;
  backbone_forward(m.backbone, std::move(segments), batch * segments_per, mel, frames,
                   tr.backbone);
  detail::gem_group_forward(tr.backbone, batch, segments_per, static_cast<double>(m.gem_p),
                            m.gem.eps, tr.gem);
  const int C = m.config.feature_channels();
  tr.logits.assign(static_cast<std::size_t>(batch) * m.n_classes, T(0));
  for (int b = 0; b < batch; ++b) {
    const T* g = tr.gem.pooled.data() + static_cast<std::size_t>(b) * C;
    T* lo = tr.logits.data() + static_cast<std::size_t>(b) * m.n_classes;
    for (int k = 0; k < m.n_classes; ++k) {
      const T* wk = m.head_weight.data() + static_cast<std::size_t>(k) * C;
      T acc = m.head_bias[k];
      for (int c = 0; c < C; ++c) acc += wk[c] * g[c];
      lo[k] = acc;
    }
  }
}

// Parameter gradients are written into grads (zero-initialized shapes of m).
template <typename T>
void backward_bird(const BirdModelT<T>& m, const BirdForwardTrace<T>& tr, const T* dlogits,
                   BirdModelT<T>& grads) {
  const int C = m.config.feature_channels();
  const int B = tr.batch;
  std::vector<T> dpooled(static_cast<std::size_t>(B) * C, T(0));
  for (int b = 0; b < B; ++b) {
    const T* dl = dlogits + static_cast<std::size_t>(b) * m.n_classes;
    const T* g = tr.gem.pooled.data() + static_cast<std::size_t>(b) * C;
    for (int k = 0; k < m.n_classes; ++k) {
      const T* wk = m.head_weight.data() + static_cast<std::size_t>(k) * C;
      T* dwk = grads.head_weight.data() + static_cast<std::size_t>(k) * C;
      const T d = dl[k];
      grads.head_bias[k] += d;
      for (int c = 0; c < C; ++c) {
        dwk[c] += d * g[c];
        dpooled[static_cast<std::size_t>(b) * C + c] += d * wk[c];
      }
    }
  }
  std::vector<T> dfeatures(tr.backbone.features().size());
  T* dp = m.gem.trainable ? &grads.gem_p : nullptr;
  detail::gem_group_backward(tr.backbone, B, tr.segments_per, static_cast<double>(m.gem_p),
                             m.gem.eps, tr.gem, dpooled.data(), dfeatures.data(), dp);
  backbone_backward(m.backbone, tr.backbone, std::move(dfeatures), grads.backbone);
}

// Single 5 s segment -> per-class probabilities.
std::vector<float> forward_bird_infer(const BirdModel& m, const Mat<float>& spec);

// Softmax attention over time: scores u_t = attn_w . h[:,t], weights
// a = softmax(u), pooled[c] = sum_t a_t h[c][t].
template <typename T>
void attention_pool(const T* h, int channels, int frames, const T* attn_w, T* weights_out,
                    T* pooled_out) {
  T mx = -std::numeric_limits<T>::infinity();
  for (int t = 0; t < frames; ++t) {
    T u = T(0);
    for (int c = 0; c < channels; ++c) u += attn_w[c] * h[static_cast<std::size_t>(c) * frames + t];
    weights_out[t] = u;
    mx = std::max(mx, u);
  }
  T z = T(0);
  for (int t = 0; t < frames; ++t) {
    weights_out[t] = std::exp(weights_out[t] - mx);
    z += weights_out[t];
  }
  for (int t = 0; t < frames; ++t) weights_out[t] /= z;
  for (int c = 0; c < channels; ++c) {
    T acc = T(0);
    for (int t = 0; t < frames; ++t) {
      acc += weights_out[t] * h[static_cast<std::size_t>(c) * frames + t];
    }
    pooled_out[c] = acc;
  }
}

template <typename T>
struct BinaryForwardTrace {
  BackboneTrace<T> backbone;
  int batch = 0;
  std::vector<T> h;       // [batch][C][T] frequency-meaned features
  std::vector<T> attn;    // [batch][T] softmax weights
  std::vector<T> pooled;  // [batch][C]
  std::vector<T> logits;  // [batch]
};

// Backbone, mean over the frequency axis, softmax attention over time,
// linear head. Length-agnostic in the time dimension.
template <typename T>
void forward_binary_batch(const BinaryModelT<T>& m, std::vector<T> images, int batch, int mel,
                          int frames, BinaryForwardTrace<T>& tr) {
  tr.batch = batch;
  backbone_forward(m.backbone, std::move(images), batch, mel, frames, tr.backbone);
  const int C = m.config.feature_channels();
  const int fh = tr.backbone.feature_h();
  const int ft = tr.backbone.feature_w();
  const std::size_t map_size = static_cast<std::size_t>(fh) * ft;
  const T* feat = tr.backbone.features().data();

  tr.h.assign(static_cast<std::size_t>(batch) * C * ft, T(0));
  tr.attn.assign(static_cast<std::size_t>(batch) * ft, T(0));
  tr.pooled.assign(static_cast<std::size_t>(batch) * C, T(0));
  tr.logits.assign(batch, T(0));

  for (int b = 0; b < batch; ++b) {
    T* hb = tr.h.data() + static_cast<std::size_t>(b) * C * ft;
    for (int c = 0; c < C; ++c) {
      const T* x = feat + (static_cast<std::size_t>(b) * C + c) * map_size;
      for (int t = 0; t < ft; ++t) {
        T acc = T(0);
        for (int f = 0; f < fh; ++f) acc += x[static_cast<std::size_t>(f) * ft + t];
        hb[static_cast<std::size_t>(c) * ft + t] = acc / static_cast<T>(fh);
      }
    }
    T* ab = tr.attn.data() + static_cast<std::size_t>(b) * ft;
    T* pb = tr.pooled.data() + static_cast<std::size_t>(b) * C;
    attention_pool(hb, C, ft, m.attn_weight.data(), ab, pb);
    T logit = m.head_bias;
    for (int c = 0; c < C; ++c) logit += m.head_weight[c] * pb[c];
    tr.logits[b] = logit;
  }
}

template <typename T>
void backward_binary(const BinaryModelT<T>& m, const BinaryForwardTrace<T>& tr, const T* dlogits,
                     BinaryModelT<T>& grads) {
  const int C = m.config.feature_channels();
  const int fh = tr.backbone.feature_h();
  const int ft = tr.backbone.feature_w();
  const std::size_t map_size = static_cast<std::size_t>(fh) * ft;
  std::vector<T> dfeatures(tr.backbone.features().size(), T(0));

  std::vector<T> dh(static_cast<std::size_t>(C) * ft);
  std::vector<T> da(ft), du(ft);
  for (int b = 0; b < tr.batch; ++b) {
    const T d = dlogits[b];
    const T* hb = tr.h.data() + static_cast<std::size_t>(b) * C * ft;
    const T* ab = tr.attn.data() + static_cast<std::size_t>(b) * ft;
    const T* pb = tr.pooled.data() + static_cast<std::size_t>(b) * C;

    grads.head_bias += d;
    std::fill(dh.begin(), dh.end(), T(0));
    for (int c = 0; c < C; ++c) {
      grads.head_weight[c] += d * pb[c];
    }
    // through pooled = sum_t a_t h_t
    for (int t = 0; t < ft; ++t) {
      T acc = T(0);
      for (int c = 0; c < C; ++c) acc += d * m.head_weight[c] * hb[static_cast<std::size_t>(c) * ft + t];
      da[t] = acc;
    }
    for (int c = 0; c < C; ++c) {
      const T dpc = d * m.head_weight[c];
      for (int t = 0; t < ft; ++t) dh[static_cast<std::size_t>(c) * ft + t] += ab[t] * dpc;
    }
    // softmax jacobian
    T dot = T(0);
    for (int t = 0; t < ft; ++t) dot += ab[t] * da[t];
    for (int t = 0; t < ft; ++t) du[t] = ab[t] * (da[t] - dot);
    for (int c = 0; c < C; ++c) {
      T acc = T(0);
      for (int t = 0; t < ft; ++t) {
        acc += du[t] * hb[static_cast<std::size_t>(c) * ft + t];
        dh[static_cast<std::size_t>(c) * ft + t] += du[t] * m.attn_weight[c];
      }
      grads.attn_weight[c] += acc;
    }
    // frequency-mean backward
    for (int c = 0; c < C; ++c) {
      T* dx = dfeatures.data() + (static_cast<std::size_t>(b) * C + c) * map_size;
      const T* dhc = dh.data() + static_cast<std::size_t>(c) * ft;
      for (int f = 0; f < fh; ++f) {
        for (int t = 0; t < ft; ++t) {
          dx[static_cast<std::size_t>(f) * ft + t] = dhc[t] / static_cast<T>(fh);
        }
      }
    }
  }
  backbone_backward(m.backbone, tr.backbone, std::move(dfeatures), grads.backbone);
}

// Probability that any bird call is present in the spectrogram.
float forward_binary(const BinaryModel& m, const Mat<float>& spec);

// ---------------------------------------------------------------------------
// Parameter plumbing shared by the optimizer, gradient checks, and precision
// conversion.

template <typename T>
BackboneT<T> make_backbone(const BackboneConfig& config) {
  config.validate();
  BackboneT<T> bb;
  int in_c = 1;
  for (const int out_c : config.channels) {
    ConvLayerT<T> layer;
    layer.in_c = in_c;
    layer.out_c = out_c;
    layer.weight.assign(static_cast<std::size_t>(out_c) * in_c * kConvKernel * kConvKernel, T(0));
    layer.bias.assign(out_c, T(0));
    bb.blocks.push_back(std::move(layer));
    in_c = out_c;
  }
  return bb;
}

template <typename T>
BirdModelT<T> make_zero_bird(const BackboneConfig& config, const GeMConfig& gem, int n_classes) {
  BirdModelT<T> m;
  m.config = config;
  m.gem = gem;
  m.n_classes = n_classes;
  m.backbone = make_backbone<T>(config);
  m.gem_p = T(0);
  m.head_weight.assign(static_cast<std::size_t>(n_classes) * config.feature_channels(), T(0));
  m.head_bias.assign(n_classes, T(0));
  return m;
}

template <typename T>
BinaryModelT<T> make_zero_binary(const BackboneConfig& config) {
  BinaryModelT<T> m;
  m.config = config;
  m.backbone = make_backbone<T>(config);
  m.attn_weight.assign(config.feature_channels(), T(0));
  m.head_weight.assign(config.feature_channels(), T(0));
  m.head_bias = T(0);
  return m;
}

// Visits (pointer, count) for every trainable tensor in declaration order.
// gem_p is visited only when trainable.
template <typename T, typename F>
void for_each_param(BirdModelT<T>& m, F&& f) {
  for (auto& blk : m.backbone.blocks) {
    f(blk.weight.data(), blk.weight.size());
    f(blk.bias.data(), blk.bias.size());
  }
  if (m.gem.trainable) f(&m.gem_p, std::size_t{1});
  f(m.head_weight.data(), m.head_weight.size());
  f(m.head_bias.data(), m.head_bias.size());
}

template <typename T, typename F>
void for_each_param(BinaryModelT<T>& m, F&& f) {
  for (auto& blk : m.backbone.blocks) {
    f(blk.weight.data(), blk.weight.size());
    f(blk.bias.data(), blk.bias.size());
  }
  f(m.attn_weight.data(), m.attn_weight.size());
  f(m.head_weight.data(), m.head_weight.size());
  f(&m.head_bias, std::size_t{1});
}

template <typename TO, typename TI>
BirdModelT<TO> model_cast(const BirdModelT<TI>& in) {
  BirdModelT<TO> out = make_zero_bird<TO>(in.config, in.gem, in.n_classes);
  out.gem_p = static_cast<TO>(in.gem_p);
  for (std::size_t i = 0; i < in.backbone.blocks.size(); ++i) {
    const auto& src = in.backbone.blocks[i];
    auto& dst = out.backbone.blocks[i];
    for (std::size_t j = 0; j < src.weight.size(); ++j) dst.weight[j] = static_cast<TO>(src.weight[j]);
    for (std::size_t j = 0; j < src.bias.size(); ++j) dst.bias[j] = static_cast<TO>(src.bias[j]);
  }
  for (std::size_t j = 0; j < in.head_weight.size(); ++j) out.head_weight[j] = static_cast<TO>(in.head_weight[j]);
  for (std::size_t j = 0; j < in.head_bias.size(); ++j) out.head_bias[j] = static_cast<TO>(in.head_bias[j]);
  return out;
}

template <typename TO, typename TI>
BinaryModelT<TO> model_cast_binary(const BinaryModelT<TI>& in) {
  BinaryModelT<TO> out = make_zero_binary<TO>(in.config);
  for (std::size_t i = 0; i < in.backbone.blocks.size(); ++i) {
    const auto& src = in.backbone.blocks[i];
    auto& dst = out.backbone.blocks[i];
    for (std::size_t j = 0; j < src.weight.size(); ++j) dst.weight[j] = static_cast<TO>(src.weight[j]);
    for (std::size_t j = 0; j < src.bias.size(); ++j) dst.bias[j] = static_cast<TO>(src.bias[j]);
  }
  for (std::size_t j = 0; j < in.attn_weight.size(); ++j) out.attn_weight[j] = static_cast<TO>(in.attn_weight[j]);
  for (std::size_t j = 0; j < in.head_weight.size(); ++j) out.head_weight[j] = static_cast<TO>(in.head_weight[j]);
  out.head_bias = static_cast<TO>(in.head_bias);
  return out;
}

}  // namespace birdsed
