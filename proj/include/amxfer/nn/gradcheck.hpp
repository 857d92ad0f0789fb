#pragma once

// Central-difference verification of analytic gradients (double precision).

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "amxfer/nn/autoencoder.hpp"

namespace amxfer::nn {

struct GradCheckOptions {
  double step = 1e-6;
  /// Replace entries whose perturbation flips any relu on/off decision.
  bool skip_kinks = true;
  double tolerance = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  /// Entries checked per tensor; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 1;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;

  const TensorCheck *find(const std::string &name) const {
    for (const auto &t : tensors)
      if (t.name == name)
        return &t;
    return nullptr;
  }
};

inline nlohmann::json to_json(const GradCheckReport &r) {
  nlohmann::json t = nlohmann::json::array();
  for (const auto &c : r.tensors)
    t.push_back({{"name", c.name},
                 {"checked", c.checked},
                 {"skipped", c.skipped},
                 {"max_rel_error", c.max_rel_error},
                 {"max_abs_error", c.max_abs_error},
                 {"pass", c.pass}});
  return {{"tolerance", r.tolerance}, {"max_rel_error", r.max_rel_error}, {"pass", r.pass},
          {"tensors", t}};
}

namespace detail {

inline std::vector<std::size_t> pick_entries(std::size_t size, std::size_t max_entries,
                                             std::mt19937_64 &rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i)
    idx[i] = i;
  if (max_entries == 0 || max_entries >= size)
    return idx;
  for (std::size_t i = 0; i + 1 < size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (size - i));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

/// Compares `analytic` against central differences of `loss` for up to
/// `max_entries` entries of `values` (perturbed in place and restored).
inline TensorCheck check_tensor(const std::string &name, std::vector<double> &values,
                                const std::vector<double> &analytic,
                                const std::function<double()> &loss, const GradCheckOptions &opt,
                                std::mt19937_64 &rng) {
  TensorCheck tc;
  tc.name = name;
  KinkProbe probe;
  KinkProbe *const outer = kink_probe;
  kink_probe = opt.skip_kinks ? &probe : nullptr;
  probe.reset();
  loss();
  const std::uint64_t base = probe.signature;
  bool crossed = false;
  auto eval = [&] {
    probe.reset();
    const double l = loss();
    crossed = crossed || (opt.skip_kinks && probe.signature != base);
    return l;
  };
  const std::size_t want = opt.max_entries == 0 ? values.size() : opt.max_entries;
  for (std::size_t i : pick_entries(values.size(), opt.max_entries, rng)) {
    if (tc.checked == want)
      break;
    const double saved = values[i];
    crossed = false;
    values[i] = saved + opt.step;
    const double lp = eval();
    values[i] = saved - opt.step;
    const double lm = eval();
    values[i] = saved;
    const double numeric = (lp - lm) / (2.0 * opt.step);
    if (crossed) {
      ++tc.skipped;
      continue;
    }
    const double err = std::abs(analytic[i] - numeric);
    const double rel = err / std::max({std::abs(analytic[i]), std::abs(numeric), opt.floor});
    tc.max_abs_error = std::max(tc.max_abs_error, err);
    tc.max_rel_error = std::max(tc.max_rel_error, rel);
    ++tc.checked;
  }
  kink_probe = outer;
  tc.pass = tc.checked > 0 && tc.max_rel_error <= opt.tolerance;
  return tc;
}

inline void finish(GradCheckReport &r, double tolerance) {
  r.tolerance = tolerance;
  r.max_rel_error = 0.0;
  r.pass = true;
  for (auto &t : r.tensors) {
    t.pass = t.checked > 0 && t.max_rel_error <= tolerance;
    r.max_rel_error = std::max(r.max_rel_error, t.max_rel_error);
    r.pass = r.pass && t.pass;
  }
}

template <class Fill> Batch<double> random_batch(int n, int steps, int c, int h, int w, Fill fill) {
  Batch<double> b(n, steps, c, h, w);
  for (auto &v : b.data)
    v = fill();
  return b;
}

} // namespace detail

/// Checks a single layer under the scalar loss sum(weights * layer(x)), for
/// every parameter tensor and the input.
inline GradCheckReport gradient_check_layer(Layer<double> &layer, const Batch<double> &x,
                                            const GradCheckOptions &opt,
                                            const ForwardOptions &fwd = {true, false}) {
  std::mt19937_64 rng(opt.seed);
  auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  Batch<double> probe = layer.forward(x, fwd);
  Batch<double> weights = probe;
  for (auto &v : weights.data)
    v = uni();
  auto loss_of = [&](const Batch<double> &input) {
    Batch<double> y = layer.forward(input, fwd);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
      s += weights.data[i] * y.data[i];
    return s;
  };
  Batch<double> input = x;
  loss_of(input);
  layer.zero_grad();
  Batch<double> dx = layer.backward(weights, true, true);

  GradCheckReport report;
  auto loss = [&] { return loss_of(input); };
  for (auto &p : layer.params()) {
    const std::vector<double> analytic = p.grad->data;
    report.tensors.push_back(detail::check_tensor(p.name, p.value->data, analytic, loss, opt, rng));
  }
  report.tensors.push_back(detail::check_tensor("X", input.data, dx.data, loss, opt, rng));
  detail::finish(report, opt.tolerance);
  return report;
}

/// Random ConvLSTM layer (uniform parameters, nonzero peepholes) checked over a
/// short window.
struct CellCheckShape {
  int in_channels = 2, hidden_channels = 2, kernel = 3, height = 4, width = 4, steps = 3,
      sequences = 2;
  Activation activation = Activation::none;
};

inline GradCheckReport gradient_check_conv_lstm(std::uint64_t seed, const CellCheckShape &shape = {},
                                                GradCheckOptions opt = {}) {
  opt.seed = seed;
  LayerSpec spec{LayerKind::conv_lstm, shape.in_channels, shape.hidden_channels, shape.kernel, 1,
                 shape.activation,     Group::convlstm,   false};
  ConvLstm<double> layer(spec, shape.height, shape.width);
  Initializer init(seed);
  for (auto &p : layer.params())
    init.uniform(*p.value, -0.6, 0.6);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Batch<double> x = detail::random_batch(shape.sequences, shape.steps, shape.in_channels,
                                         shape.height, shape.width, uni);
  return gradient_check_layer(layer, x, opt);
}

/// Checks the whole autoencoder under sum(weights * model(x)) with batch norm
/// in batch-statistics mode (running statistics untouched).
inline GradCheckReport gradient_check_model(Autoencoder<double> &model, const Batch<double> &x,
                                            const GradCheckOptions &opt) {
  std::mt19937_64 rng(opt.seed);
  auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
  const ForwardOptions fwd{true, false};
  Batch<double> weights = model.forward(x, fwd);
  for (auto &v : weights.data)
    v = uni();
  Batch<double> input = x;
  auto loss = [&] {
    Batch<double> y = model.forward(input, fwd);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
      s += weights.data[i] * y.data[i];
    return s;
  };
  loss();
  model.zero_grad();
  Batch<double> dx = model.backward(weights, true);

  GradCheckReport report;
  for (auto &[n, p] : model.parameters()) {
    const std::vector<double> analytic = p.grad->data;
    const std::string name = "layer" + std::to_string(n) + "." +
                             std::string(to_string(model.layer(n).spec.kind)) + "." + p.name;
    report.tensors.push_back(detail::check_tensor(name, p.value->data, analytic, loss, opt, rng));
  }
  report.tensors.push_back(detail::check_tensor("X", input.data, dx.data, loss, opt, rng));
  detail::finish(report, opt.tolerance);
  return report;
}

} // namespace amxfer::nn
