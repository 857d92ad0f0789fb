#pragma once

#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "amxfer/nn/autoencoder.hpp"
#include "amxfer/structure.hpp"

namespace amxfer::nn {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 7;

  friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

/// splitmix64 finalizer over a pair; used to derive per-epoch shuffle seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stacks windows into an (n, T, 1, H, W) batch.
template <class S>
Batch<S> to_batch(const std::vector<Concatenation> &cs, std::span<const std::size_t> idx) {
  if (idx.empty())
    return {};
  const auto &first = cs[idx[0]];
  const int T = first.length();
  const int H = first.frames.at(0).image.height, W = first.frames[0].image.width;
  Batch<S> b(static_cast<int>(idx.size()), T, 1, H, W);
  for (std::size_t s = 0; s < idx.size(); ++s) {
    const auto &c = cs[idx[s]];
    if (c.length() != T)
      throw ShapeError("batch: window length differs (" + std::to_string(c.length()) + " vs " +
                       std::to_string(T) + ")");
    for (int t = 0; t < T; ++t) {
      const auto &img = c.frames[t].image;
      if (img.height != H || img.width != W)
        throw ShapeError("batch: frame shape differs");
      std::copy(img.pixels.begin(), img.pixels.end(), b.frame(static_cast<int>(s), t));
    }
  }
  return b;
}

template <class S> Batch<S> to_batch(const std::vector<Concatenation> &cs) {
  std::vector<std::size_t> idx(cs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return to_batch<S>(cs, idx);
}

/// Adam over the unfrozen parameters of a model.
template <class S> class Adam {
public:
  Adam(const TrainConfig &cfg) : cfg_(cfg) {}

  void step(Autoencoder<S> &model) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    auto params = model.parameters();
    if (m_.empty()) {
      m_.resize(params.size());
      v_.resize(params.size());
    }
    for (std::size_t n = 0; n < params.size(); ++n) {
      auto &[layer, p] = params[n];
      if (model.layer(layer).spec.frozen)
        continue;
      auto &m = m_[n], &v = v_[n];
      if (m.empty()) {
        m.assign(p.value->size(), 0.0);
        v.assign(p.value->size(), 0.0);
      }
      S *w = p.value->ptr();
      const S *g = p.grad->ptr();
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * static_cast<double>(g[i]) * g[i];
        const double mh = m[i] / c1, vh = v[i] / c2;
        w[i] = static_cast<S>(w[i] - cfg_.learning_rate * mh / (std::sqrt(vh) + cfg_.epsilon));
      }
    }
  }

private:
  TrainConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Called after each epoch with (global epoch, loss); returning false stops.
using EpochCallback = std::function<bool(int, double)>;

inline void require_normal_training_set(const std::vector<Concatenation> &train_set) {
  if (train_set.empty())
    throw ArgumentError("training set is empty");
  for (std::size_t n = 0; n < train_set.size(); ++n)
    if (train_set[n].label != FrameLabel::normal)
      throw ContractError("training window " + std::to_string(n) + " is " +
                          std::string(to_string(train_set[n].label)) +
                          "; the autoencoder trains on normal windows only");
}

/// Minimizes mean squared reconstruction error with Adam (fresh state per
/// call). Epoch e shuffles with mix_seed(seed, global epoch), so training in
/// pieces from a checkpoint matches one continuous call. Returns the per-epoch
/// losses of this call.
template <class S>
std::vector<double> train(Autoencoder<S> &model, const std::vector<Concatenation> &train_set,
                          const TrainConfig &cfg, const std::string &phase = "train",
                          const EpochCallback &on_epoch = {}) {
  require_normal_training_set(train_set);
  if (cfg.batch_size < 1)
    throw ArgumentError("batch_size must be >= 1");
  if (cfg.epochs < 0)
    throw ArgumentError("epochs must be >= 0");
  std::vector<double> losses;
  if (cfg.epochs == 0)
    return losses;
  {
    std::vector<std::size_t> probe{0};
    model.check_input(to_batch<S>(train_set, probe));
  }
  Adam<S> opt(cfg);
  std::vector<std::size_t> order(train_set.size());
  const ForwardOptions fwd{true, true};
  for (int e = 0; e < cfg.epochs; ++e) {
    const int global = model.epochs_trained;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(global)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      Batch<S> x = to_batch<S>(train_set, std::span(order).subspan(start, len));
      Batch<S> y = model.forward(x, fwd);
      Batch<S> dy;
      const double loss = mse_loss(y, x, &dy);
      total += loss * static_cast<double>(len);
      model.zero_grad();
      model.backward(dy);
      opt.step(model);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    losses.push_back(epoch_loss);
    model.history.push_back({global, phase, epoch_loss});
    ++model.epochs_trained;
    if (on_epoch && !on_epoch(global, epoch_loss))
      break;
  }
  return losses;
}

/// Per-window reconstruction in inference mode, in chunks of `chunk` windows.
template <class S>
std::vector<Batch<S>> reconstruct(Autoencoder<S> &model, const std::vector<Concatenation> &cs,
                                  int chunk = 32) {
  std::vector<Batch<S>> out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < cs.size(); start += chunk) {
    idx.clear();
    for (std::size_t n = start; n < std::min(cs.size(), start + chunk); ++n)
      idx.push_back(n);
    out.push_back(model.forward(to_batch<S>(cs, idx)));
  }
  return out;
}

} // namespace amxfer::nn
