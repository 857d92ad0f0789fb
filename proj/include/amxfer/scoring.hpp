#pragma once

// Reconstruction costs, regularity scores, thresholds and detection accuracy.
//
//   d(x, y) = (I(x, y) - O(x, y))^2          per pixel
//   d_t     = sum over pixels of frame t
//   r       = sum of d_t over the window
//   sa      = (r - r_min) / r_max            (normalization "max_scaled")
//           = (r - r_min) / (r_max - r_min)  (normalization "range")
//   sr      = 1 - sa

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "amxfer/nn/train.hpp"
#include "amxfer/structure.hpp"

namespace amxfer {

enum class Residual { squared, absolute };
enum class Normalization { max_scaled, range };
enum class ThresholdRule { kth_min_regularity, max_train_error, percentile_error };
/// window: r = sum_t d_t. per_frame: r = T * max_t d_t, so a single anomalous
/// frame is not diluted by the regular frames around it.
enum class ScoringMode { window, per_frame };

inline std::string_view to_string(Residual r) { return r == Residual::squared ? "squared" : "absolute"; }
inline std::string_view to_string(Normalization n) { return n == Normalization::max_scaled ? "max_scaled" : "range"; }
inline std::string_view to_string(ScoringMode m) { return m == ScoringMode::window ? "window" : "per_frame"; }
inline std::string_view to_string(ThresholdRule r) {
  switch (r) {
  case ThresholdRule::kth_min_regularity: return "kth_min_regularity";
  case ThresholdRule::max_train_error: return "max_train_error";
  case ThresholdRule::percentile_error: return "percentile_error";
  }
  return "?";
}

inline Residual parse_residual(std::string_view s) {
  if (s == "squared") return Residual::squared;
  if (s == "absolute") return Residual::absolute;
  throw ValidationError("residual: unknown value '" + std::string(s) + "'");
}
inline Normalization parse_normalization(std::string_view s) {
  if (s == "max_scaled") return Normalization::max_scaled;
  if (s == "range") return Normalization::range;
  throw ValidationError("normalization: unknown value '" + std::string(s) + "'");
}
inline ScoringMode parse_scoring_mode(std::string_view s) {
  if (s == "window") return ScoringMode::window;
  if (s == "per_frame") return ScoringMode::per_frame;
  throw ValidationError("scoring mode: unknown value '" + std::string(s) + "'");
}
inline ThresholdRule parse_threshold_rule(std::string_view s) {
  for (auto r : {ThresholdRule::kth_min_regularity, ThresholdRule::max_train_error,
                 ThresholdRule::percentile_error})
    if (to_string(r) == s)
      return r;
  throw ValidationError("threshold rule: unknown value '" + std::string(s) + "'");
}

inline bool is_regularity_rule(ThresholdRule r) { return r == ThresholdRule::kth_min_regularity; }

struct ScoringConfig {
  Residual residual = Residual::squared;
  Normalization normalization = Normalization::max_scaled;
  ScoringMode mode = ScoringMode::window;
  ThresholdRule rule = ThresholdRule::kth_min_regularity;
  int k = 3;
  double percentile = 99.0;
};

inline nlohmann::json to_json(const ScoringConfig &c) {
  return {{"residual", to_string(c.residual)}, {"normalization", to_string(c.normalization)},
          {"mode", to_string(c.mode)},         {"threshold_rule", to_string(c.rule)},
          {"k", c.k},                          {"percentile", c.percentile}};
}

struct WindowCost {
  std::vector<double> d; // per-frame errors d_t
  double r = 0.0;
};

/// Per-frame errors of one reconstructed window (frame-major, T frames of
/// `pixels` values each).
template <class S>
WindowCost window_cost(const S *original, const S *reconstruction, int steps, std::size_t pixels,
                       Residual residual, ScoringMode mode = ScoringMode::window) {
  using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
  WindowCost wc;
  wc.d.resize(steps);
  for (int t = 0; t < steps; ++t) {
    Eigen::Map<const Arr> a(original + t * pixels, static_cast<Eigen::Index>(pixels));
    Eigen::Map<const Arr> b(reconstruction + t * pixels, static_cast<Eigen::Index>(pixels));
    const auto diff = a.template cast<double>() - b.template cast<double>();
    wc.d[t] = residual == Residual::squared ? diff.square().sum() : diff.abs().sum();
  }
  if (mode == ScoringMode::window) {
    for (double v : wc.d)
      wc.r += v;
  } else {
    wc.r = steps * *std::max_element(wc.d.begin(), wc.d.end());
  }
  return wc;
}

/// Costs of every window of an original/reconstruction batch pair.
template <class S>
std::vector<WindowCost> batch_costs(const nn::Batch<S> &original, const nn::Batch<S> &recon,
                                    Residual residual, ScoringMode mode = ScoringMode::window) {
  if (!original.same_shape(recon))
    throw ShapeError("reconstruction shape " + recon.shape_string() + " differs from input " +
                     original.shape_string());
  std::vector<WindowCost> out;
  out.reserve(original.n);
  const std::size_t px = original.frame_size();
  for (int s = 0; s < original.n; ++s)
    out.push_back(window_cost(original.frame(s, 0), recon.frame(s, 0), original.steps, px,
                              residual, mode));
  return out;
}

template <class S>
std::vector<WindowCost> reconstruction_costs(nn::Autoencoder<S> &model,
                                             const std::vector<Concatenation> &cs,
                                             const ScoringConfig &cfg = {}, int chunk = 32) {
  std::vector<WindowCost> out;
  out.reserve(cs.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < cs.size(); start += chunk) {
    idx.clear();
    for (std::size_t n = start; n < std::min(cs.size(), start + chunk); ++n)
      idx.push_back(n);
    const nn::Batch<S> x = nn::to_batch<S>(cs, idx);
    const nn::Batch<S> y = model.forward(x);
    for (auto &wc : batch_costs(x, y, cfg.residual, cfg.mode))
      out.push_back(std::move(wc));
  }
  return out;
}

/// r_min / r_max of a normalization set and the resulting score maps.
struct Normalizer {
  double r_min = 0.0, r_max = 0.0;
  Normalization normalization = Normalization::max_scaled;

  static Normalizer fit(const std::vector<double> &costs, Normalization n = Normalization::max_scaled) {
    if (costs.empty())
      throw ArgumentError("normalization set is empty");
    auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
    return {*lo, *hi, n};
  }

  /// Abnormality; 0 when the denominator vanishes.
  double sa(double r) const {
    const double denom = normalization == Normalization::max_scaled ? r_max : r_max - r_min;
    return denom > 0.0 ? (r - r_min) / denom : 0.0;
  }
  double sr(double r) const { return 1.0 - sa(r); }
};

inline double clamp_display(double v) { return std::clamp(v, 0.0, 1.0); }

/// kth_min_regularity: k-th smallest of `values` (train sr). max_train_error:
/// maximum of `values` (train r). percentile_error: nearest-rank percentile of
/// `values` (train r).
inline double select_threshold(std::vector<double> values, ThresholdRule rule, int k = 3,
                               double percentile = 99.0) {
  if (values.empty())
    throw ArgumentError("threshold: empty training statistics");
  std::sort(values.begin(), values.end());
  switch (rule) {
  case ThresholdRule::kth_min_regularity:
    if (k < 1 || static_cast<std::size_t>(k) > values.size())
      throw ArgumentError("threshold: k=" + std::to_string(k) + " outside 1.." +
                          std::to_string(values.size()));
    return values[k - 1];
  case ThresholdRule::max_train_error: return values.back();
  case ThresholdRule::percentile_error: {
    if (!(percentile > 0.0 && percentile <= 100.0))
      throw ArgumentError("threshold: percentile must be in (0, 100]");
    const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * values.size()));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
  }
  }
  return values.back();
}

inline bool is_detected(ThresholdRule rule, double sr, double r, double threshold) {
  return is_regularity_rule(rule) ? sr < threshold : r > threshold;
}

struct ScoredWindow {
  std::size_t index = 0;
  std::size_t start_index = 0;
  FrameLabel label = FrameLabel::unlabeled;
  std::vector<double> d;
  double r = 0.0, sa = 0.0, sr = 0.0;
  bool detected = false;
};

struct Evaluation {
  double accuracy_pct = 0.0;
  std::size_t anomalies = 0, detected_anomalies = 0;
  std::size_t normals = 0, false_positives = 0;
  std::optional<double> false_positive_rate; // normals in the test set only
};

/// accuracy = 100 * detected anomalies / anomalies.
inline Evaluation evaluate(std::vector<ScoredWindow> &items, double threshold, ThresholdRule rule) {
  Evaluation ev;
  for (auto &it : items) {
    it.detected = is_detected(rule, it.sr, it.r, threshold);
    if (it.label == FrameLabel::anomalous) {
      ++ev.anomalies;
      ev.detected_anomalies += it.detected;
    } else if (it.label == FrameLabel::normal) {
      ++ev.normals;
      ev.false_positives += it.detected;
    }
  }
  if (ev.anomalies == 0)
    throw ArgumentError("test set has no anomalous windows; detection accuracy is undefined");
  ev.accuracy_pct = 100.0 * static_cast<double>(ev.detected_anomalies) / ev.anomalies;
  if (ev.normals > 0)
    ev.false_positive_rate = static_cast<double>(ev.false_positives) / ev.normals;
  return ev;
}

struct RegularityReport {
  ScoringConfig config;
  double r_min = 0.0, r_max = 0.0;
  double threshold = 0.0;
  std::vector<double> train_sr;
  std::vector<double> train_r;
  std::vector<ScoredWindow> items;
  Evaluation evaluation;
};

inline std::vector<ScoredWindow> score_windows(const std::vector<WindowCost> &costs,
                                               const std::vector<Concatenation> &cs,
                                               const Normalizer &norm) {
  std::vector<ScoredWindow> out;
  out.reserve(costs.size());
  for (std::size_t n = 0; n < costs.size(); ++n) {
    ScoredWindow w;
    w.index = n;
    w.start_index = n < cs.size() ? cs[n].start_index : n;
    w.label = n < cs.size() ? cs[n].label : FrameLabel::unlabeled;
    w.d = costs[n].d;
    w.r = costs[n].r;
    w.sa = norm.sa(w.r);
    w.sr = norm.sr(w.r);
    out.push_back(std::move(w));
  }
  return out;
}

/// Normalizes against the train costs, picks the threshold on the train
/// statistics and evaluates the test windows.
inline RegularityReport regularity_report(const std::vector<WindowCost> &train_costs,
                                          const std::vector<WindowCost> &test_costs,
                                          const std::vector<Concatenation> &test_set,
                                          const ScoringConfig &cfg) {
  RegularityReport rep;
  rep.config = cfg;
  for (const auto &c : train_costs)
    rep.train_r.push_back(c.r);
  const Normalizer norm = Normalizer::fit(rep.train_r, cfg.normalization);
  rep.r_min = norm.r_min;
  rep.r_max = norm.r_max;
  for (double r : rep.train_r)
    rep.train_sr.push_back(norm.sr(r));
  rep.threshold = is_regularity_rule(cfg.rule)
                      ? select_threshold(rep.train_sr, cfg.rule, cfg.k, cfg.percentile)
                      : select_threshold(rep.train_r, cfg.rule, cfg.k, cfg.percentile);
  rep.items = score_windows(test_costs, test_set, norm);
  rep.evaluation = evaluate(rep.items, rep.threshold, cfg.rule);
  return rep;
}

template <class S>
RegularityReport score_model(nn::Autoencoder<S> &model, const std::vector<Concatenation> &train_set,
                             const std::vector<Concatenation> &test_set, const ScoringConfig &cfg) {
  return regularity_report(reconstruction_costs(model, train_set, cfg),
                           reconstruction_costs(model, test_set, cfg), test_set, cfg);
}

inline nlohmann::json to_json(const RegularityReport &r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto &w : r.items)
    items.push_back({{"index", w.index},
                     {"start_index", w.start_index},
                     {"label", to_string(w.label)},
                     {"d", w.d},
                     {"r", w.r},
                     {"sa", w.sa},
                     {"sr", w.sr},
                     {"sr_display", clamp_display(w.sr)},
                     {"detected", w.detected}});
  const auto &ev = r.evaluation;
  nlohmann::json fp = ev.false_positive_rate ? nlohmann::json(*ev.false_positive_rate) : nlohmann::json();
  return {{"schema_version", 1},
          {"kind", "amxfer.regularity_report"},
          {"config", to_json(r.config)},
          {"r_min", r.r_min},
          {"r_max", r.r_max},
          {"threshold", r.threshold},
          {"threshold_rule", to_string(r.config.rule)},
          {"accuracy_pct", ev.accuracy_pct},
          {"anomalies", ev.anomalies},
          {"detected_anomalies", ev.detected_anomalies},
          {"normals", ev.normals},
          {"false_positive_rate", fp},
          {"train_r", r.train_r},
          {"train_sr", r.train_sr},
          {"items", items}};
}

} // namespace amxfer
