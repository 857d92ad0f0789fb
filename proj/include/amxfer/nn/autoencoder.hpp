#pragma once

// Time-distributed convolutional LSTM autoencoder: two stride-2 conv
// encoders, a three-layer ConvLSTM bottleneck and three transposed-conv
// decoders, with batch norm between learnable layers.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amxfer/nn/conv_lstm.hpp"
#include "amxfer/nn/layers.hpp"

namespace amxfer::nn {

struct Architecture {
  int height = 32;
  int width = 32;
  int steps = 4; // window length T
  /// Divides every hidden channel count (desk-scale width reduction); 1 keeps
  /// the reference stack.
  int channel_divisor = 1;

  friend bool operator==(const Architecture &, const Architecture &) = default;
};

/// The reference 14-row stack (8 learnable layers + 6 batch norms).
inline std::vector<LayerSpec> reference_stack(int channel_divisor = 1) {
  if (channel_divisor < 1)
    throw ArgumentError("channel_divisor must be >= 1");
  auto ch = [&](int c) { return std::max(1, c / channel_divisor); };
  using K = LayerKind;
  using A = Activation;
  auto conv = [](K kind, int in, int out, int k, int s, A act) {
    return LayerSpec{kind, in, out, k, s, act, Group::cnn, false};
  };
  auto bn = [](int c) { return LayerSpec{K::batch_norm, c, c, 0, 1, A::none, Group::cnn, false}; };
  std::vector<LayerSpec> stack = {
      conv(K::conv2d, 1, ch(128), 5, 2, A::relu),
      bn(ch(128)),
      conv(K::conv2d, ch(128), ch(64), 5, 2, A::relu),
      bn(ch(64)),
      conv(K::conv_lstm, ch(64), ch(64), 3, 1, A::relu),
      bn(ch(64)),
      conv(K::conv_lstm, ch(64), ch(32), 3, 1, A::relu),
      conv(K::conv_lstm, ch(32), ch(64), 3, 1, A::relu),
      bn(ch(64)),
      conv(K::conv2d_transpose, ch(64), ch(64), 5, 2, A::relu),
      bn(ch(64)),
      conv(K::conv2d_transpose, ch(64), ch(128), 5, 2, A::relu),
      bn(ch(128)),
      conv(K::conv2d_transpose, ch(128), 1, 2, 1, A::sigmoid),
  };
  return stack;
}

/// Freeze-group tagging: convolutions (plain and transposed) are `cnn`,
/// ConvLSTM layers `convlstm`, and each batch norm inherits the group of the
/// nearest preceding learnable layer.
inline void tag_groups(std::vector<LayerSpec> &specs) {
  std::optional<Group> last;
  for (std::size_t n = 0; n < specs.size(); ++n) {
    auto &s = specs[n];
    switch (s.kind) {
    case LayerKind::conv2d:
    case LayerKind::conv2d_transpose: s.group = Group::cnn; break;
    case LayerKind::conv_lstm: s.group = Group::convlstm; break;
    case LayerKind::batch_norm:
      if (!last)
        throw TaggingError("layer " + std::to_string(n) + ": batch norm has no preceding learnable layer");
      s.group = *last;
      continue;
    default:
      throw TaggingError("layer " + std::to_string(n) + ": unknown layer kind " +
                         std::to_string(static_cast<int>(s.kind)));
    }
    last = s.group;
  }
}

enum class Trainable { all, cnn, convlstm, none };

inline std::string_view to_string(Trainable t) {
  switch (t) {
  case Trainable::all: return "all";
  case Trainable::cnn: return "cnn";
  case Trainable::convlstm: return "convlstm";
  case Trainable::none: return "none";
  }
  return "?";
}

inline Trainable parse_trainable(std::string_view s) {
  for (auto t : {Trainable::all, Trainable::cnn, Trainable::convlstm, Trainable::none})
    if (to_string(t) == s)
      return t;
  throw ArgumentError("unknown trainable group '" + std::string(s) + "'");
}

template <class S> class Autoencoder {
public:
  Autoencoder(const Architecture &arch, std::uint64_t seed)
      : Autoencoder(arch, reference_stack(arch.channel_divisor), seed) {}

  Autoencoder(const Architecture &arch, std::vector<LayerSpec> specs, std::uint64_t seed)
      : arch_(arch) {
    if (arch.height <= 0 || arch.width <= 0 || arch.height % 4 != 0 || arch.width % 4 != 0)
      throw ShapeError("input H and W must be positive and divisible by 4 (got " +
                       std::to_string(arch.height) + "x" + std::to_string(arch.width) + ")");
    if (arch.steps < 1)
      throw ShapeError("window length T must be >= 1");
    tag_groups(specs);
    int h = arch.height, w = arch.width, c = 1;
    for (const auto &s : specs) {
      if (s.in_channels != c)
        throw ShapeError("layer stack: channel mismatch at " + std::string(to_string(s.kind)));
      std::unique_ptr<Layer<S>> layer;
      switch (s.kind) {
      case LayerKind::conv2d: layer = std::make_unique<Conv2d<S>>(s); break;
      case LayerKind::conv2d_transpose: layer = std::make_unique<ConvTranspose2d<S>>(s); break;
      case LayerKind::batch_norm: layer = std::make_unique<BatchNorm<S>>(s); break;
      case LayerKind::conv_lstm: layer = std::make_unique<ConvLstm<S>>(s, h, w); break;
      }
      std::tie(h, w) = layer->output_hw(h, w);
      c = s.out_channels;
      layers_.push_back(std::move(layer));
    }
    if (h != arch.height || w != arch.width || c != 1)
      throw ShapeError("layer stack does not reconstruct the input shape");
    Initializer init(seed);
    for (auto &l : layers_)
      l->initialize(init);
  }

  Autoencoder(const Autoencoder &o) : epochs_trained(o.epochs_trained), history(o.history),
                                      arch_(o.arch_) {
    for (const auto &l : o.layers_)
      layers_.push_back(l->clone());
  }
  Autoencoder &operator=(const Autoencoder &o) {
    if (this != &o) {
      Autoencoder tmp(o);
      std::swap(*this, tmp);
    }
    return *this;
  }
  Autoencoder(Autoencoder &&) noexcept = default;
  Autoencoder &operator=(Autoencoder &&) noexcept = default;

  struct EpochRecord {
    int epoch = 0; // global epoch index
    std::string phase;
    double loss = 0.0;
  };

  int epochs_trained = 0;
  std::vector<EpochRecord> history;

  const Architecture &architecture() const { return arch_; }
  std::size_t size() const { return layers_.size(); }
  Layer<S> &layer(std::size_t n) { return *layers_[n]; }
  const Layer<S> &layer(std::size_t n) const { return *layers_[n]; }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto &l : layers_)
      out.push_back(l->spec);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto &l : layers_)
      n += l->parameter_count();
    return n;
  }

  /// Freezes every layer outside `group`.
  void set_trainable(Trainable group) {
    for (auto &l : layers_) {
      bool trainable = group == Trainable::all ||
                       (group == Trainable::cnn && l->spec.group == Group::cnn) ||
                       (group == Trainable::convlstm && l->spec.group == Group::convlstm);
      l->spec.frozen = !trainable;
    }
  }

  void check_input(const Batch<S> &x) const {
    if (x.steps != arch_.steps || x.height != arch_.height || x.width != arch_.width ||
        x.channels != 1)
      throw ShapeError("input batch " + x.shape_string() + " does not match model input (n, " +
                       std::to_string(arch_.steps) + ", " + std::to_string(arch_.height) + ", " +
                       std::to_string(arch_.width) + ", 1)");
  }

  Batch<S> forward(const Batch<S> &x, const ForwardOptions &opt = {}) {
    check_input(x);
    Batch<S> a = x;
    for (auto &l : layers_)
      a = l->forward(a, opt);
    return a;
  }

  void zero_grad() {
    for (auto &l : layers_)
      l->zero_grad();
  }

  /// Back-propagates dL/dy through the stack after a forward pass. Parameter
  /// gradients accumulate only for unfrozen layers; propagation stops below
  /// the lowest unfrozen layer unless `input_grad`.
  Batch<S> backward(const Batch<S> &dy, bool input_grad = false) {
    std::size_t lowest = layers_.size();
    for (std::size_t n = 0; n < layers_.size(); ++n)
      if (!layers_[n]->spec.frozen) {
        lowest = n;
        break;
      }
    if (input_grad)
      lowest = 0;
    Batch<S> g = dy;
    for (std::size_t n = layers_.size(); n-- > lowest;) {
      const bool pg = !layers_[n]->spec.frozen;
      const bool ig = n > lowest || input_grad;
      g = layers_[n]->backward(g, pg, ig);
    }
    return g;
  }

  /// Every parameter tensor, layer by layer.
  std::vector<std::pair<std::size_t, ParamRef<S>>> parameters() {
    std::vector<std::pair<std::size_t, ParamRef<S>>> out;
    for (std::size_t n = 0; n < layers_.size(); ++n)
      for (auto &p : layers_[n]->params())
        out.emplace_back(n, p);
    return out;
  }

private:
  Architecture arch_;
  std::vector<std::unique_ptr<Layer<S>>> layers_;
};

/// Mean squared error and its gradient with respect to `output`.
template <class S>
double mse_loss(const Batch<S> &output, const Batch<S> &target, Batch<S> *grad) {
  if (!output.same_shape(target))
    throw ShapeError("loss: output and target shapes differ");
  const double inv = 1.0 / static_cast<double>(output.data.size());
  double sum = 0.0;
  if (grad)
    *grad = Batch<S>(output.n, output.steps, output.channels, output.height, output.width);
  for (std::size_t i = 0; i < output.data.size(); ++i) {
    const double d = static_cast<double>(output.data[i]) - target.data[i];
    sum += d * d;
    if (grad)
      grad->data[i] = static_cast<S>(2.0 * d * inv);
  }
  return sum * inv;
}

} // namespace amxfer::nn
