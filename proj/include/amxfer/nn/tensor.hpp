#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "amxfer/error.hpp"

namespace amxfer::nn {

template <class S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S> using MapR = Eigen::Map<MatR<S>>;
template <class S> using CMapR = Eigen::Map<const MatR<S>>;

/// Dense tensor with a row-major shape.
template <class S> struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, S fill = S(0)) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }

  static std::size_t count(const std::vector<int> &s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::size_t size() const { return data.size(); }
  S *ptr() { return data.data(); }
  const S *ptr() const { return data.data(); }
  void zero() { std::fill(data.begin(), data.end(), S(0)); }

  friend bool operator==(const Tensor &, const Tensor &) = default;
};

/// A batch of n sequences of `steps` frames, each frame C x H x W; stored
/// frame-major so time-distributed layers see n*steps independent frames.
template <class S> struct Batch {
  int n = 0, steps = 0, channels = 0, height = 0, width = 0;
  std::vector<S> data;

  Batch() = default;
  Batch(int n_, int steps_, int c, int h, int w)
      : n(n_), steps(steps_), channels(c), height(h), width(w),
        data(static_cast<std::size_t>(n_) * steps_ * c * h * w, S(0)) {}

  int frames() const { return n * steps; }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t frame_size() const { return static_cast<std::size_t>(channels) * pixels(); }
  S *frame(int b) { return data.data() + static_cast<std::size_t>(b) * frame_size(); }
  const S *frame(int b) const { return data.data() + static_cast<std::size_t>(b) * frame_size(); }
  S *frame(int s, int t) { return frame(s * steps + t); }
  const S *frame(int s, int t) const { return frame(s * steps + t); }

  bool same_shape(const Batch &o) const {
    return n == o.n && steps == o.steps && channels == o.channels && height == o.height &&
           width == o.width;
  }
  std::string shape_string() const {
    return "(" + std::to_string(n) + ", " + std::to_string(steps) + ", " +
           std::to_string(height) + ", " + std::to_string(width) + ", " +
           std::to_string(channels) + ")";
  }

  template <class T> Batch<T> cast() const {
    Batch<T> out(n, steps, channels, height, width);
    std::transform(data.begin(), data.end(), out.data.begin(),
                   [](S v) { return static_cast<T>(v); });
    return out;
  }
};

/// Sliding-window geometry of a 2-D convolution from an in_h x in_w plane to
/// out_h x out_w with "same" padding: out = ceil(in / stride), padding split
/// with the smaller half first.
struct ConvGeometry {
  int kernel = 1, stride = 1;
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;

  static ConvGeometry same(int in_h, int in_w, int kernel, int stride) {
    ConvGeometry g;
    g.kernel = kernel;
    g.stride = stride;
    g.in_h = in_h;
    g.in_w = in_w;
    g.out_h = (in_h + stride - 1) / stride;
    g.out_w = (in_w + stride - 1) / stride;
    g.pad_top = std::max((g.out_h - 1) * stride + kernel - in_h, 0) / 2;
    g.pad_left = std::max((g.out_w - 1) * stride + kernel - in_w, 0) / 2;
    return g;
  }

  int col_rows(int channels) const { return channels * kernel * kernel; }
  int col_cols() const { return out_h * out_w; }
};

/// Unfolds one C x in_h x in_w plane into a (C*k*k) x (out_h*out_w) matrix.
template <class S> void im2col(const S *img, int channels, const ConvGeometry &g, S *col) {
  const int k = g.kernel, cols = g.col_cols();
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        S *row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        const S *plane = img + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          S *dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, S(0));
            continue;
          }
          const S *src = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? src[ix] : S(0);
          }
        }
      }
}

/// Adjoint of im2col: scatters and accumulates columns back into the plane.
template <class S> void col2im(const S *col, int channels, const ConvGeometry &g, S *img) {
  const int k = g.kernel, cols = g.col_cols();
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const S *row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        S *plane = img + static_cast<std::size_t>(c) * g.in_h * g.in_w;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_h)
            continue;
          const S *src = row + oy * g.out_w;
          S *dst = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix >= 0 && ix < g.in_w)
              dst[ix] += src[ox];
          }
        }
      }
}

enum class Activation { none, relu, sigmoid, tanh };

inline std::string_view to_string(Activation a) {
  switch (a) {
  case Activation::none: return "none";
  case Activation::relu: return "relu";
  case Activation::sigmoid: return "sigmoid";
  case Activation::tanh: return "tanh";
  }
  return "?";
}

/// Running hash of relu on/off decisions, recorded while installed.
struct KinkProbe {
  std::uint64_t signature = 1469598103934665603ULL;
  void reset() { signature = 1469598103934665603ULL; }
  void add(bool on) { signature = (signature ^ (on ? 2u : 1u)) * 1099511628211ULL; }
};

inline thread_local KinkProbe *kink_probe = nullptr;

template <class S> inline S sigmoid(S x) { return S(1) / (S(1) + std::exp(-x)); }

template <class S> inline S activate(Activation a, S x) {
  switch (a) {
  case Activation::relu:
    if (kink_probe)
      kink_probe->add(x > S(0));
    return x > S(0) ? x : S(0);
  case Activation::sigmoid: return sigmoid(x);
  case Activation::tanh: return std::tanh(x);
  case Activation::none: break;
  }
  return x;
}

/// Derivative expressed through the activation's output y.
template <class S> inline S activate_grad_from_output(Activation a, S y) {
  switch (a) {
  case Activation::relu: return y > S(0) ? S(1) : S(0);
  case Activation::sigmoid: return y * (S(1) - y);
  case Activation::tanh: return S(1) - y * y;
  case Activation::none: break;
  }
  return S(1);
}

} // namespace amxfer::nn
