#pragma once

// Synthetic melt-pool streams for two statistically distinct processes with
// injectable, ground-truth-labeled anomalies.

#include <array>
#include <algorithm>
#include <cmath>
#include <optional>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "amxfer/frame.hpp"

namespace amxfer {

struct ProcessProfile {
  std::string name;
  int height = 32;
  int width = 32;
  std::pair<double, double> pool_sigma_range{1.6, 2.4}; // px, major axis
  std::pair<double, double> amplitude_range{0.85, 1.0};
  double max_anisotropy = 1.3; // major/minor sigma ratio bound for normal pools
  double drift_per_frame = 0.25; // px
  double background_level = 0.04;
  double pixel_noise = 0.01; // uniform +- amplitude
  double off_frame_rate = 0.05;
  std::map<AnomalyKind, double> anomaly_mix;
  int frames_per_track = 100; // time steps per control step
  int tracks_per_layer = 5;   // control steps per layer

  void validate() const {
    auto fail = [&](const std::string &m) { throw ArgumentError("profile '" + name + "': " + m); };
    if (height <= 0 || width <= 0 || height % 4 != 0 || width % 4 != 0)
      fail("frame size must be positive and divisible by 4");
    if (!(pool_sigma_range.first > 0 && pool_sigma_range.first <= pool_sigma_range.second))
      fail("invalid pool sigma range");
    if (!(amplitude_range.first >= 0 && amplitude_range.first <= amplitude_range.second &&
          amplitude_range.second <= 1))
      fail("invalid amplitude range");
    if (!(max_anisotropy >= 1.0))
      fail("max_anisotropy must be >= 1");
    if (!(background_level >= 0 && background_level < 1))
      fail("background level must lie in [0, 1)");
    if (!(off_frame_rate >= 0 && off_frame_rate < 1))
      fail("off_frame_rate must lie in [0, 1)");
    if (drift_per_frame < 0 || pixel_noise < 0)
      fail("drift and noise must be non-negative");
    double total = 0;
    for (auto [k, p] : anomaly_mix) {
      if (!(p >= 0 && p <= 1))
        fail("anomaly probabilities must lie in [0, 1]");
      total += p;
    }
    if (total > 1.0 + 1e-12)
      fail("anomaly probabilities sum to more than 1");
    if (frames_per_track < 1 || tracks_per_layer < 1)
      fail("frames_per_track and tracks_per_layer must be >= 1");
  }
};

/// LPBF-like (small bright pools, slow drift) and DED-like (wide dim pools,
/// faster drift, more laser-off frames) profiles sharing one frame size.
inline std::pair<ProcessProfile, ProcessProfile> default_profiles() {
  ProcessProfile lpbf;
  lpbf.name = "lpbf_like";
  lpbf.anomaly_mix = {{AnomalyKind::spatter, 0.03},
                      {AnomalyKind::plume, 0.02},
                      {AnomalyKind::noise, 0.015}};

  ProcessProfile ded;
  ded.name = "ded_like";
  ded.pool_sigma_range = {3.6, 5.0};
  ded.amplitude_range = {0.55, 0.75};
  ded.drift_per_frame = 0.7;
  ded.background_level = 0.12;
  ded.off_frame_rate = 0.12;
  ded.anomaly_mix = {{AnomalyKind::irregular_shape, 0.04},
                     {AnomalyKind::spatter, 0.008},
                     {AnomalyKind::noise, 0.008}};
  ded.frames_per_track = 30;
  ded.tracks_per_layer = 1;
  return {lpbf, ded};
}

namespace detail {

// Bit-level uniform draw so streams do not depend on the standard library's
// distribution implementations.
class SynthRng {
public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }

private:
  std::mt19937_64 engine_;
};

inline void add_gaussian(Image &img, double cx, double cy, double sigma_major, double sigma_minor,
                         double angle, double amplitude) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double a = 1.0 / (sigma_major * sigma_major), b = 1.0 / (sigma_minor * sigma_minor);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = c * dx + s * dy, v = -s * dx + c * dy;
      img.at(y, x) += static_cast<float>(amplitude * std::exp(-0.5 * (a * u * u + b * v * v)));
    }
}

inline float quantize8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<float>(std::lround(v * 255.0) / 255.0);
}

} // namespace detail

/// Deterministic in (profile, n_frames, seed). Pixels are clamped to [0, 1]
/// and quantized to 8-bit levels so a PNG round trip is exact.
inline BuildDataset generate_stream(const ProcessProfile &profile, int n_frames,
                                    std::uint64_t seed) {
  profile.validate();
  if (n_frames < 1)
    throw ArgumentError("n_frames must be >= 1");
  detail::SynthRng rng(seed);
  const int H = profile.height, W = profile.width;
  BuildDataset ds;
  ds.process_tag = profile.name;
  ds.frames.reserve(static_cast<std::size_t>(n_frames));

  const double margin_x = W / 4.0, margin_y = H / 4.0;
  double cx = W / 2.0, cy = H / 2.0;
  double heading = rng.uniform(0, 2 * std::numbers::pi);

  for (int n = 0; n < n_frames; ++n) {
    Frame f;
    f.time = n % profile.frames_per_track;
    f.control = (n / profile.frames_per_track) % profile.tracks_per_layer;
    f.layer = n / (profile.frames_per_track * profile.tracks_per_layer);
    f.provenance = profile.name + "/seed=" + std::to_string(seed);

    // Pool center wanders along a heading that slowly turns, reflecting at
    // the central-region boundary.
    heading += rng.uniform(-0.5, 0.5);
    cx += profile.drift_per_frame * std::cos(heading);
    cy += profile.drift_per_frame * std::sin(heading);
    auto reflect = [&](double &p, double lo, double hi, bool horizontal) {
      if (p < lo || p > hi) {
        p = p < lo ? 2 * lo - p : 2 * hi - p;
        heading = horizontal ? std::numbers::pi - heading : -heading;
      }
    };
    reflect(cx, margin_x, W - 1 - margin_x, true);
    reflect(cy, margin_y, H - 1 - margin_y, false);

    if (rng.uniform() < profile.off_frame_rate) {
      f.image = Image(H, W);
      for (auto &p : f.image.pixels)
        p = detail::quantize8(rng.uniform(0.0, 0.01));
      f.label = FrameLabel::unlabeled;
      ds.frames.push_back(std::move(f));
      continue;
    }

    double sigma_major = rng.uniform(profile.pool_sigma_range.first, profile.pool_sigma_range.second);
    double ratio = rng.uniform(1.0, profile.max_anisotropy);
    const double angle = rng.uniform(0, std::numbers::pi);
    const double amplitude = rng.uniform(profile.amplitude_range.first, profile.amplitude_range.second);

    std::optional<AnomalyKind> kind;
    {
      double u = rng.uniform(), acc = 0;
      for (auto k : kAllAnomalyKinds) {
        auto it = profile.anomaly_mix.find(k);
        acc += it == profile.anomaly_mix.end() ? 0.0 : it->second;
        if (u < acc) {
          kind = k;
          break;
        }
      }
    }
    if (kind == AnomalyKind::irregular_shape) {
      ratio = rng.uniform(2.5, 4.0);
      sigma_major *= 1.5;
    }

    Image img(H, W, static_cast<float>(profile.background_level));
    detail::add_gaussian(img, cx, cy, sigma_major, sigma_major / ratio, angle, amplitude);
    if (kind == AnomalyKind::irregular_shape) {
      // Elongated pool with a detached trailing lobe.
      const double off = rng.uniform(1.1, 1.5) * sigma_major;
      const double lobe = rng.uniform(0.35, 0.5) * sigma_major;
      detail::add_gaussian(img, cx - off * std::cos(angle), cy - off * std::sin(angle), lobe, lobe,
                           0.0, amplitude * rng.uniform(0.6, 0.9));
    }

    if (kind == AnomalyKind::spatter) {
      const int count = rng.integer(1, 4);
      for (int s = 0; s < count; ++s) {
        const double dist = rng.uniform(0.25, 0.4) * std::min(H, W);
        const double dir = rng.uniform(0, 2 * std::numbers::pi);
        const double sigma = rng.uniform(0.7, 1.2);
        detail::add_gaussian(img, cx + dist * std::cos(dir), cy + dist * std::sin(dir), sigma,
                             sigma, 0.0, rng.uniform(0.5, 0.9));
      }
    } else if (kind == AnomalyKind::plume) {
      const double dir = rng.uniform(0, 2 * std::numbers::pi);
      const double len = rng.uniform(0.15, 0.25) * std::min(H, W);
      const double off = 0.9 * len + sigma_major;
      detail::add_gaussian(img, cx + off * std::cos(dir), cy + off * std::sin(dir), len,
                           rng.uniform(1.0, 1.6), dir, rng.uniform(0.2, 0.35));
    }

    for (auto &p : img.pixels)
      p += static_cast<float>(rng.uniform(-profile.pixel_noise, profile.pixel_noise));

    if (kind == AnomalyKind::noise) {
      const double fraction = rng.uniform(0.03, 0.06);
      for (auto &p : img.pixels)
        if (rng.uniform() < fraction)
          p = static_cast<float>(rng.uniform(0.4, 1.0));
    }

    for (auto &p : img.pixels)
      p = detail::quantize8(p);
    f.image = std::move(img);
    f.label = kind ? FrameLabel::anomalous : FrameLabel::normal;
    if (kind)
      f.anomaly_kinds.insert(*kind);
    ds.frames.push_back(std::move(f));
  }
  ds.fit_bounds();
  return ds;
}

} // namespace amxfer
