#pragma once

// Time-distributed layers: every frame of every sequence is processed
// independently (batch norm statistics are shared across all of them).

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "amxfer/nn/tensor.hpp"

namespace amxfer::nn {

enum class LayerKind { conv2d, batch_norm, conv_lstm, conv2d_transpose };
enum class Group { cnn, convlstm };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
  case LayerKind::conv2d: return "conv2d";
  case LayerKind::batch_norm: return "batch_norm";
  case LayerKind::conv_lstm: return "conv_lstm";
  case LayerKind::conv2d_transpose: return "conv2d_transpose";
  }
  return "?";
}

inline std::string_view to_string(Group g) { return g == Group::cnn ? "cnn" : "convlstm"; }

struct LayerSpec {
  LayerKind kind = LayerKind::conv2d;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 0; // 0 for batch_norm
  int stride = 1;
  Activation activation = Activation::none;
  Group group = Group::cnn;
  bool frozen = false;

  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

template <class S> struct ParamRef {
  std::string name;
  Tensor<S> *value;
  Tensor<S> *grad;
};

struct ForwardOptions {
  bool training = false;            // batch-norm batch statistics for unfrozen layers
  bool update_running_stats = true; // only meaningful when training
};

/// Deterministic weight initializer (Glorot-uniform style).
class Initializer {
public:
  explicit Initializer(std::uint64_t seed) : engine_(seed) {}

  template <class S> void glorot(Tensor<S> &t, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto &v : t.data)
      v = static_cast<S>((2.0 * uniform() - 1.0) * limit);
  }
  template <class S> void uniform(Tensor<S> &t, double lo, double hi) {
    for (auto &v : t.data)
      v = static_cast<S>(lo + (hi - lo) * uniform());
  }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 engine_;
};

template <class S> class Layer {
public:
  explicit Layer(LayerSpec spec) : spec(spec) {}
  virtual ~Layer() = default;

  LayerSpec spec;

  virtual std::unique_ptr<Layer> clone() const = 0;
  /// Output plane size for an input plane size.
  virtual std::pair<int, int> output_hw(int h, int w) const { return {h, w}; }
  virtual Batch<S> forward(const Batch<S> &x, const ForwardOptions &opt) = 0;
  /// Accumulates parameter gradients when `param_grads`; returns dL/dx when
  /// `input_grad` (otherwise an empty batch).
  virtual Batch<S> backward(const Batch<S> &dy, bool param_grads, bool input_grad) = 0;
  virtual std::vector<ParamRef<S>> params() = 0;
  /// Non-trainable state saved with checkpoints (batch-norm running stats).
  virtual std::vector<std::pair<std::string, Tensor<S> *>> state() { return {}; }
  virtual void initialize(Initializer &) {}

  void zero_grad() {
    for (auto &p : params())
      p.grad->zero();
  }
  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto &p : params())
      n += p.value->size();
    return n;
  }

protected:
  void check_input(const Batch<S> &x) const {
    if (x.channels != spec.in_channels)
      throw ShapeError(std::string(to_string(spec.kind)) + ": input X has " +
                       std::to_string(x.channels) + " channels, expected " +
                       std::to_string(spec.in_channels));
  }
};

template <class S> class Conv2d final : public Layer<S> {
public:
  explicit Conv2d(LayerSpec s)
      : Layer<S>(s), weight({s.out_channels, s.in_channels, s.kernel, s.kernel}),
        bias({s.out_channels}), dweight(weight.shape), dbias(bias.shape) {}

  Tensor<S> weight, bias, dweight, dbias;

  std::unique_ptr<Layer<S>> clone() const override { return std::make_unique<Conv2d>(*this); }

  std::pair<int, int> output_hw(int h, int w) const override {
    auto g = ConvGeometry::same(h, w, this->spec.kernel, this->spec.stride);
    return {g.out_h, g.out_w};
  }

  void initialize(Initializer &init) override {
    const int k2 = this->spec.kernel * this->spec.kernel;
    init.glorot(weight, this->spec.in_channels * k2, this->spec.out_channels * k2);
    bias.zero();
  }

  std::vector<ParamRef<S>> params() override {
    return {{"kernel", &weight, &dweight}, {"bias", &bias, &dbias}};
  }

  Batch<S> forward(const Batch<S> &x, const ForwardOptions &) override {
    this->check_input(x);
    input_ = x;
    geom_ = ConvGeometry::same(x.height, x.width, this->spec.kernel, this->spec.stride);
    const int cin = this->spec.in_channels, cout = this->spec.out_channels;
    const int K = geom_.col_rows(cin), P = geom_.col_cols();
    Batch<S> y(x.n, x.steps, cout, geom_.out_h, geom_.out_w);
    col_.resize(static_cast<std::size_t>(K) * P);
    CMapR<S> W(weight.ptr(), cout, K);
    for (int b = 0; b < x.frames(); ++b) {
      im2col(x.frame(b), cin, geom_, col_.data());
      MapR<S> out(y.frame(b), cout, P);
      out.noalias() = W * CMapR<S>(col_.data(), K, P);
      for (int c = 0; c < cout; ++c)
        for (int p = 0; p < P; ++p)
          out(c, p) = activate(this->spec.activation, out(c, p) + bias.data[c]);
    }
    output_ = y;
    return y;
  }

  Batch<S> backward(const Batch<S> &dy, bool param_grads, bool input_grad) override {
    const int cin = this->spec.in_channels, cout = this->spec.out_channels;
    const int K = geom_.col_rows(cin), P = geom_.col_cols();
    Batch<S> dx;
    if (input_grad)
      dx = Batch<S>(input_.n, input_.steps, cin, input_.height, input_.width);
    std::vector<S> dz(static_cast<std::size_t>(cout) * P), dcol(static_cast<std::size_t>(K) * P);
    CMapR<S> W(weight.ptr(), cout, K);
    MapR<S> dW(dweight.ptr(), cout, K);
    for (int b = 0; b < dy.frames(); ++b) {
      const S *g = dy.frame(b);
      const S *yo = output_.frame(b);
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz[i] = g[i] * activate_grad_from_output(this->spec.activation, yo[i]);
      CMapR<S> DZ(dz.data(), cout, P);
      if (param_grads) {
        im2col(input_.frame(b), cin, geom_, col_.data());
        dW.noalias() += DZ * CMapR<S>(col_.data(), K, P).transpose();
        for (int c = 0; c < cout; ++c)
          dbias.data[c] += DZ.row(c).sum();
      }
      if (input_grad) {
        MapR<S>(dcol.data(), K, P).noalias() = W.transpose() * DZ;
        col2im(dcol.data(), cin, geom_, dx.frame(b));
      }
    }
    return dx;
  }

private:
  Batch<S> input_, output_;
  ConvGeometry geom_;
  std::vector<S> col_;
};

/// Transposed convolution: the adjoint of a same-padded Conv2d mapping the
/// (stride*H) x (stride*W) output plane onto the H x W input plane.
template <class S> class ConvTranspose2d final : public Layer<S> {
public:
  explicit ConvTranspose2d(LayerSpec s)
      : Layer<S>(s), weight({s.in_channels, s.out_channels, s.kernel, s.kernel}),
        bias({s.out_channels}), dweight(weight.shape), dbias(bias.shape) {}

  Tensor<S> weight, bias, dweight, dbias;

  std::unique_ptr<Layer<S>> clone() const override {
    return std::make_unique<ConvTranspose2d>(*this);
  }

  std::pair<int, int> output_hw(int h, int w) const override {
    return {h * this->spec.stride, w * this->spec.stride};
  }

  void initialize(Initializer &init) override {
    const int k2 = this->spec.kernel * this->spec.kernel;
    init.glorot(weight, this->spec.out_channels * k2, this->spec.in_channels * k2);
    bias.zero();
  }

  std::vector<ParamRef<S>> params() override {
    return {{"kernel", &weight, &dweight}, {"bias", &bias, &dbias}};
  }

  Batch<S> forward(const Batch<S> &x, const ForwardOptions &) override {
    this->check_input(x);
    input_ = x;
    const int s = this->spec.stride;
    geom_ = ConvGeometry::same(x.height * s, x.width * s, this->spec.kernel, s);
    if (geom_.out_h != x.height || geom_.out_w != x.width)
      throw ShapeError("conv2d_transpose: geometry does not invert to the input plane");
    const int cin = this->spec.in_channels, cout = this->spec.out_channels;
    const int K = geom_.col_rows(cout), P = geom_.col_cols();
    Batch<S> y(x.n, x.steps, cout, geom_.in_h, geom_.in_w);
    col_.resize(static_cast<std::size_t>(K) * P);
    CMapR<S> W(weight.ptr(), cin, K);
    const std::size_t plane = y.pixels();
    for (int b = 0; b < x.frames(); ++b) {
      MapR<S>(col_.data(), K, P).noalias() = W.transpose() * CMapR<S>(x.frame(b), cin, P);
      S *out = y.frame(b);
      col2im(col_.data(), cout, geom_, out);
      for (int c = 0; c < cout; ++c)
        for (std::size_t p = 0; p < plane; ++p) {
          S &v = out[c * plane + p];
          v = activate(this->spec.activation, v + bias.data[c]);
        }
    }
    output_ = y;
    return y;
  }

  Batch<S> backward(const Batch<S> &dy, bool param_grads, bool input_grad) override {
    const int cin = this->spec.in_channels, cout = this->spec.out_channels;
    const int K = geom_.col_rows(cout), P = geom_.col_cols();
    Batch<S> dx;
    if (input_grad)
      dx = Batch<S>(input_.n, input_.steps, cin, input_.height, input_.width);
    const std::size_t fsize = dy.frame_size(), plane = dy.pixels();
    std::vector<S> dz(fsize);
    CMapR<S> W(weight.ptr(), cin, K);
    MapR<S> dW(dweight.ptr(), cin, K);
    for (int b = 0; b < dy.frames(); ++b) {
      const S *g = dy.frame(b);
      const S *yo = output_.frame(b);
      for (std::size_t i = 0; i < fsize; ++i)
        dz[i] = g[i] * activate_grad_from_output(this->spec.activation, yo[i]);
      im2col(dz.data(), cout, geom_, col_.data());
      CMapR<S> DCOL(col_.data(), K, P);
      if (param_grads) {
        dW.noalias() += CMapR<S>(input_.frame(b), cin, P) * DCOL.transpose();
        for (int c = 0; c < cout; ++c) {
          S acc = 0;
          for (std::size_t p = 0; p < plane; ++p)
            acc += dz[c * plane + p];
          dbias.data[c] += acc;
        }
      }
      if (input_grad)
        MapR<S>(dx.frame(b), cin, P).noalias() = W * DCOL;
    }
    return dx;
  }

private:
  Batch<S> input_, output_;
  ConvGeometry geom_;
  std::vector<S> col_;
};

/// Per-channel batch normalization over all frames and pixels of a batch.
/// Running statistics use momentum 0.9 and the unbiased batch variance.
template <class S> class BatchNorm final : public Layer<S> {
public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  explicit BatchNorm(LayerSpec s)
      : Layer<S>(s), gamma({s.out_channels}, S(1)), beta({s.out_channels}),
        running_mean({s.out_channels}), running_var({s.out_channels}, S(1)),
        dgamma(gamma.shape), dbeta(beta.shape) {}

  Tensor<S> gamma, beta, running_mean, running_var, dgamma, dbeta;

  std::unique_ptr<Layer<S>> clone() const override { return std::make_unique<BatchNorm>(*this); }

  void initialize(Initializer &) override {
    std::fill(gamma.data.begin(), gamma.data.end(), S(1));
    beta.zero();
    running_mean.zero();
    std::fill(running_var.data.begin(), running_var.data.end(), S(1));
  }

  std::vector<ParamRef<S>> params() override {
    return {{"gamma", &gamma, &dgamma}, {"beta", &beta, &dbeta}};
  }
  std::vector<std::pair<std::string, Tensor<S> *>> state() override {
    return {{"running_mean", &running_mean}, {"running_var", &running_var}};
  }

  Batch<S> forward(const Batch<S> &x, const ForwardOptions &opt) override {
    this->check_input(x);
    const int C = x.channels;
    const std::size_t plane = x.pixels();
    const double m = static_cast<double>(x.frames()) * static_cast<double>(plane);
    batch_stats_ = opt.training && !this->spec.frozen;
    mean_.assign(C, 0.0);
    invstd_.assign(C, 0.0);
    if (batch_stats_) {
      std::vector<double> var(C, 0.0);
      for (int b = 0; b < x.frames(); ++b)
        for (int c = 0; c < C; ++c) {
          const S *p = x.frame(b) + c * plane;
          for (std::size_t i = 0; i < plane; ++i)
            mean_[c] += p[i];
        }
      for (int c = 0; c < C; ++c)
        mean_[c] /= m;
      for (int b = 0; b < x.frames(); ++b)
        for (int c = 0; c < C; ++c) {
          const S *p = x.frame(b) + c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = p[i] - mean_[c];
            var[c] += d * d;
          }
        }
      for (int c = 0; c < C; ++c) {
        var[c] /= m;
        invstd_[c] = 1.0 / std::sqrt(var[c] + kEpsilon);
        if (opt.update_running_stats) {
          const double unbiased = m > 1 ? var[c] * m / (m - 1) : var[c];
          running_mean.data[c] =
              static_cast<S>(kMomentum * running_mean.data[c] + (1 - kMomentum) * mean_[c]);
          running_var.data[c] =
              static_cast<S>(kMomentum * running_var.data[c] + (1 - kMomentum) * unbiased);
        }
      }
    } else {
      for (int c = 0; c < C; ++c) {
        mean_[c] = running_mean.data[c];
        invstd_[c] = 1.0 / std::sqrt(static_cast<double>(running_var.data[c]) + kEpsilon);
      }
    }
    xhat_ = Batch<S>(x.n, x.steps, C, x.height, x.width);
    Batch<S> y(x.n, x.steps, C, x.height, x.width);
    for (int b = 0; b < x.frames(); ++b)
      for (int c = 0; c < C; ++c) {
        const S *p = x.frame(b) + c * plane;
        S *xh = xhat_.frame(b) + c * plane;
        S *o = y.frame(b) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          xh[i] = static_cast<S>((p[i] - mean_[c]) * invstd_[c]);
          o[i] = gamma.data[c] * xh[i] + beta.data[c];
        }
      }
    return y;
  }

  Batch<S> backward(const Batch<S> &dy, bool param_grads, bool input_grad) override {
    const int C = dy.channels;
    const std::size_t plane = dy.pixels();
    const double m = static_cast<double>(dy.frames()) * static_cast<double>(plane);
    std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
    for (int b = 0; b < dy.frames(); ++b)
      for (int c = 0; c < C; ++c) {
        const S *g = dy.frame(b) + c * plane;
        const S *xh = xhat_.frame(b) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy[c] += g[i];
          sum_dy_xhat[c] += static_cast<double>(g[i]) * xh[i];
        }
      }
    if (param_grads)
      for (int c = 0; c < C; ++c) {
        dgamma.data[c] += static_cast<S>(sum_dy_xhat[c]);
        dbeta.data[c] += static_cast<S>(sum_dy[c]);
      }
    Batch<S> dx;
    if (!input_grad)
      return dx;
    dx = Batch<S>(dy.n, dy.steps, C, dy.height, dy.width);
    for (int b = 0; b < dy.frames(); ++b)
      for (int c = 0; c < C; ++c) {
        const S *g = dy.frame(b) + c * plane;
        const S *xh = xhat_.frame(b) + c * plane;
        S *d = dx.frame(b) + c * plane;
        const double scale = gamma.data[c] * invstd_[c];
        if (batch_stats_) {
          const double a = sum_dy[c] / m, bb = sum_dy_xhat[c] / m;
          for (std::size_t i = 0; i < plane; ++i)
            d[i] = static_cast<S>(scale * (g[i] - a - xh[i] * bb));
        } else {
          for (std::size_t i = 0; i < plane; ++i)
            d[i] = static_cast<S>(scale * g[i]);
        }
      }
    return dx;
  }

private:
  Batch<S> xhat_;
  std::vector<double> mean_, invstd_;
  bool batch_stats_ = false;
};

} // namespace amxfer::nn
