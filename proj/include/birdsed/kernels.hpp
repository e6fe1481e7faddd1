#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace birdsed::kernels {

// Dense NCHW kernels for the small backbone. Convolutions are stride 1 with
// symmetric zero padding pad = k/2 (odd k), so spatial dims are preserved.
// Each output element is produced by exactly one thread with a fixed inner
// summation order, so results are bit-identical for any thread count. The
// *_serial variants are the plain reference implementations used by tests
// and the benchmark.

template <typename T>
void conv2d_forward_serial(const T* in, int n_images, int in_c, int h, int w, const T* weight,
                           const T* bias, int out_c, int k, T* out) {
  const int pad = k / 2;
  for (int s = 0; s < n_images; ++s) {
    for (int oc = 0; oc < out_c; ++oc) {
      T* out_im = out + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
      const T* w_oc = weight + static_cast<std::size_t>(oc) * in_c * k * k;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          T acc = bias[oc];
          for (int ic = 0; ic < in_c; ++ic) {
            const T* in_im = in + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
            const T* w_ic = w_oc + static_cast<std::size_t>(ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y + ky - pad;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x + kx - pad;
                if (ix < 0 || ix >= w) continue;
                acc += w_ic[ky * k + kx] * in_im[iy * w + ix];
              }
            }
          }
          out_im[y * w + x] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(const T* in, int n_images, int in_c, int h, int w, const T* weight,
                    const T* bias, int out_c, int k, T* out) {
  const int pad = k / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < n_images; ++s) {
    for (int oc = 0; oc < out_c; ++oc) {
      T* out_im = out + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
      const T* w_oc = weight + static_cast<std::size_t>(oc) * in_c * k * k;
      for (int y = 0; y < h; ++y) {
        T* out_row = out_im + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) out_row[x] = bias[oc];
      }
      for (int ic = 0; ic < in_c; ++ic) {
        const T* in_im = in + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
        const T* w_ic = w_oc + static_cast<std::size_t>(ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const T wv = w_ic[ky * k + kx];
            const int dy = ky - pad, dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            for (int y = y0; y < y1; ++y) {
              const T* in_row = in_im + static_cast<std::size_t>(y + dy) * w + dx;
              T* out_row = out_im + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) out_row[x] += wv * in_row[x];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input_serial(const T* dout, int n_images, int in_c, int h, int w,
                                  const T* weight, int out_c, int k, T* din) {
  const int pad = k / 2;
  for (int s = 0; s < n_images; ++s) {
    for (int ic = 0; ic < in_c; ++ic) {
      T* din_im = din + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          T acc = T(0);
          for (int oc = 0; oc < out_c; ++oc) {
            const T* dout_im = dout + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
            const T* w_ic =
                weight + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int y = iy - ky + pad;
              if (y < 0 || y >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int x = ix - kx + pad;
                if (x < 0 || x >= w) continue;
                acc += w_ic[ky * k + kx] * dout_im[y * w + x];
              }
            }
          }
          din_im[iy * w + ix] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const T* dout, int n_images, int in_c, int h, int w, const T* weight,
                           int out_c, int k, T* din) {
  const int pad = k / 2;
#pragma omp parallel for collapse(2) schedule(static)
  for (int s = 0; s < n_images; ++s) {
    for (int ic = 0; ic < in_c; ++ic) {
      T* din_im = din + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
      for (int iy = 0; iy < h; ++iy) {
        for (int ix = 0; ix < w; ++ix) {
          T acc = T(0);
          for (int oc = 0; oc < out_c; ++oc) {
            const T* dout_im = dout + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
            const T* w_ic =
                weight + (static_cast<std::size_t>(oc) * in_c + ic) * k * k;
            for (int ky = 0; ky < k; ++ky) {
              const int y = iy - ky + pad;
              if (y < 0 || y >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int x = ix - kx + pad;
                if (x < 0 || x >= w) continue;
                acc += w_ic[ky * k + kx] * dout_im[y * w + x];
              }
            }
          }
          din_im[iy * w + ix] = acc;
        }
      }
    }
  }
}

// Gradients w.r.t. weights and bias, accumulated over all images in a fixed
// order (image-major), parallel over output channels.
template <typename T>
void conv2d_backward_params_serial(const T* in, const T* dout, int n_images, int in_c, int h,
                                   int w, int out_c, int k, T* dweight, T* dbias) {
  const int pad = k / 2;
  for (int oc = 0; oc < out_c; ++oc) {
    T db = T(0);
    T* dw_oc = dweight + static_cast<std::size_t>(oc) * in_c * k * k;
    for (std::size_t i = 0; i < static_cast<std::size_t>(in_c) * k * k; ++i) dw_oc[i] = T(0);
    for (int s = 0; s < n_images; ++s) {
      const T* dout_im = dout + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) db += dout_im[y * w + x];
      }
      for (int ic = 0; ic < in_c; ++ic) {
        const T* in_im = in + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
        T* dw_ic = dw_oc + static_cast<std::size_t>(ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int dy = ky - pad, dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            T acc = T(0);
            for (int y = y0; y < y1; ++y) {
              const T* in_row = in_im + static_cast<std::size_t>(y + dy) * w + dx;
              const T* dout_row = dout_im + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) acc += dout_row[x] * in_row[x];
            }
            dw_ic[ky * k + kx] += acc;
          }
        }
      }
    }
    dbias[oc] = db;
  }
}

template <typename T>
void conv2d_backward_params(const T* in, const T* dout, int n_images, int in_c, int h, int w,
                            int out_c, int k, T* dweight, T* dbias) {
  const int pad = k / 2;
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < out_c; ++oc) {
    T db = T(0);
    T* dw_oc = dweight + static_cast<std::size_t>(oc) * in_c * k * k;
    for (std::size_t i = 0; i < static_cast<std::size_t>(in_c) * k * k; ++i) dw_oc[i] = T(0);
    for (int s = 0; s < n_images; ++s) {
      const T* dout_im = dout + (static_cast<std::size_t>(s) * out_c + oc) * h * w;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) db += dout_im[y * w + x];
      }
      for (int ic = 0; ic < in_c; ++ic) {
        const T* in_im = in + (static_cast<std::size_t>(s) * in_c + ic) * h * w;
        T* dw_ic = dw_oc + static_cast<std::size_t>(ic) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int dy = ky - pad, dx = kx - pad;
            const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
            const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
            T acc = T(0);
            for (int y = y0; y < y1; ++y) {
              const T* in_row = in_im + static_cast<std::size_t>(y + dy) * w + dx;
              const T* dout_row = dout_im + static_cast<std::size_t>(y) * w;
              for (int x = x0; x < x1; ++x) acc += dout_row[x] * in_row[x];
            }
            dw_ic[ky * k + kx] += acc;
          }
        }
      }
    }
    dbias[oc] = db;
  }
}

// 2x2 average pooling, stride 2, floor semantics (a trailing odd row/column
// is dropped).
template <typename T>
void avgpool2_forward_serial(const T* in, int n_maps, int h, int w, T* out) {
  const int oh = h / 2, ow = w / 2;
  for (int m = 0; m < n_maps; ++m) {
    const T* in_im = in + static_cast<std::size_t>(m) * h * w;
    T* out_im = out + static_cast<std::size_t>(m) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const T* r0 = in_im + static_cast<std::size_t>(2 * y) * w + 2 * x;
        const T* r1 = r0 + w;
        out_im[y * ow + x] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
    }
  }
}

template <typename T>
void avgpool2_forward(const T* in, int n_maps, int h, int w, T* out) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int m = 0; m < n_maps; ++m) {
    const T* in_im = in + static_cast<std::size_t>(m) * h * w;
    T* out_im = out + static_cast<std::size_t>(m) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const T* r0 = in_im + static_cast<std::size_t>(2 * y) * w + 2 * x;
        const T* r1 = r0 + w;
        out_im[y * ow + x] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
      }
    }
  }
}

template <typename T>
void avgpool2_backward(const T* dout, int n_maps, int h, int w, T* din) {
  const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
  for (int m = 0; m < n_maps; ++m) {
    const T* dout_im = dout + static_cast<std::size_t>(m) * oh * ow;
    T* din_im = din + static_cast<std::size_t>(m) * h * w;
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) din_im[i] = T(0);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const T g = dout_im[y * ow + x] * T(0.25);
        T* r0 = din_im + static_cast<std::size_t>(2 * y) * w + 2 * x;
        T* r1 = r0 + w;
        r0[0] = g;
        r0[1] = g;
        r1[0] = g;
        r1[1] = g;
      }
    }
  }
}

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Smooth activation: silu(x) = x * sigmoid(x).
template <typename T>
void silu_forward(const T* in, T* out, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    out[i] = in[i] * sigmoid(in[i]);
  }
}

template <typename T>
void silu_backward(const T* pre, const T* dpost, T* dpre, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const T s = sigmoid(pre[i]);
    dpre[i] = dpost[i] * s * (T(1) + pre[i] * (T(1) - s));
  }
}

}  // namespace birdsed::kernels
