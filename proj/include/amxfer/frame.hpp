#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "amxfer/error.hpp"

namespace amxfer {

enum class FrameLabel { normal, anomalous, unlabeled };

enum class AnomalyKind { spatter, plume, noise, irregular_shape };

inline std::string_view to_string(FrameLabel l) {
  switch (l) {
  case FrameLabel::normal: return "normal";
  case FrameLabel::anomalous: return "anomalous";
  case FrameLabel::unlabeled: return "unlabeled";
  }
  return "?";
}

inline FrameLabel parse_frame_label(std::string_view s) {
  for (auto l : {FrameLabel::normal, FrameLabel::anomalous, FrameLabel::unlabeled})
    if (to_string(l) == s)
      return l;
  throw ValidationError("label: unknown value '" + std::string(s) + "'");
}

inline std::string_view to_string(AnomalyKind k) {
  switch (k) {
  case AnomalyKind::spatter: return "spatter";
  case AnomalyKind::plume: return "plume";
  case AnomalyKind::noise: return "noise";
  case AnomalyKind::irregular_shape: return "irregular_shape";
  }
  return "?";
}

inline constexpr AnomalyKind kAllAnomalyKinds[] = {AnomalyKind::spatter, AnomalyKind::plume,
                                                   AnomalyKind::noise,
                                                   AnomalyKind::irregular_shape};

inline AnomalyKind parse_anomaly_kind(std::string_view s) {
  for (auto k : kAllAnomalyKinds)
    if (to_string(k) == s)
      return k;
  throw ValidationError("anomaly kind: unknown value '" + std::string(s) + "'");
}

/// Single-channel image, row-major, intensities nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  float &at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  double mean() const {
    double s = 0.0;
    for (float v : pixels)
      s += v;
    return pixels.empty() ? 0.0 : s / static_cast<double>(pixels.size());
  }

  friend bool operator==(const Image &, const Image &) = default;
};

/// One melt-pool observation x_{i,j,k}: layer i, control step j, time step k.
struct Frame {
  Image image;
  int layer = 0;
  int control = 0;
  int time = 0;
  FrameLabel label = FrameLabel::unlabeled;
  std::set<AnomalyKind> anomaly_kinds;
  std::string provenance;

  auto index() const { return std::tuple(layer, control, time); }

  friend bool operator==(const Frame &, const Frame &) = default;
};

struct BuildDataset {
  std::vector<Frame> frames;
  int layers = 1;        // L
  int control_steps = 1; // M (per layer bound)
  int time_steps = 1;    // N (per control-step bound)
  std::string process_tag;

  /// Ordering, uniqueness, index and bound invariants.
  void validate() const {
    if (layers < 1 || control_steps < 1 || time_steps < 1)
      throw ValidationError("dataset bounds L, M, N must be >= 1");
    for (std::size_t n = 0; n < frames.size(); ++n) {
      const auto &f = frames[n];
      if (f.layer < 0 || f.control < 0 || f.time < 0)
        throw ValidationError("frame " + std::to_string(n) + ": negative index");
      if (f.layer >= layers || f.control >= control_steps || f.time >= time_steps)
        throw ValidationError("frame " + std::to_string(n) + ": index beyond dataset bounds");
      if (n > 0 && !(frames[n - 1].index() < f.index()))
        throw ValidationError("frame " + std::to_string(n) +
                              ": (i, j, k) order is not strictly increasing");
    }
  }

  /// Recomputes L, M, N as the tightest bounds covering the frames.
  void fit_bounds() {
    layers = control_steps = time_steps = 1;
    for (const auto &f : frames) {
      layers = std::max(layers, f.layer + 1);
      control_steps = std::max(control_steps, f.control + 1);
      time_steps = std::max(time_steps, f.time + 1);
    }
  }
};

} // namespace amxfer
