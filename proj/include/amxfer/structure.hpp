#pragma once

// Spatiotemporal structuring: laser-off filtering and sliding-window
// concatenations over a frame stream ordered by (layer, control, time).
//
// Windows are built on the *filtered* sequence, so a window may straddle the
// position of a removed laser-off frame. Only time order matters for
// windowing; the (i, j, k) nesting is carried for reporting.

#include <cstddef>
#include <iostream>
#include <string>
#include <vector>

#include "amxfer/frame.hpp"

namespace amxfer {

inline constexpr int kDefaultWindow = 4;

struct Concatenation {
  std::vector<Frame> frames;
  std::size_t start_index = 0; // position of the first frame in the source stream
  FrameLabel label = FrameLabel::normal;
  std::string provenance;

  int length() const { return static_cast<int>(frames.size()); }
};

inline std::vector<Frame> filter_inactive(const std::vector<Frame> &frames,
                                          double activity_threshold) {
  if (!(activity_threshold >= 0.0 && activity_threshold <= 1.0))
    throw ArgumentError("activity threshold must lie in [0, 1]");
  std::vector<Frame> kept;
  kept.reserve(frames.size());
  for (const auto &f : frames)
    if (f.image.mean() >= activity_threshold)
      kept.push_back(f);
  return kept;
}

inline std::size_t window_count(std::size_t len, int window, int stride) {
  if (len < static_cast<std::size_t>(window))
    return 0;
  return (len - static_cast<std::size_t>(window)) / static_cast<std::size_t>(stride) + 1;
}

/// Window label: anomalous iff any member frame is anomalous; unlabeled if
/// no member is anomalous but some member carries no label.
inline FrameLabel window_label(const std::vector<Frame> &frames) {
  bool unlabeled = false;
  for (const auto &f : frames) {
    if (f.label == FrameLabel::anomalous)
      return FrameLabel::anomalous;
    unlabeled |= f.label == FrameLabel::unlabeled;
  }
  return unlabeled ? FrameLabel::unlabeled : FrameLabel::normal;
}

/// Sliding windows at offsets 0, stride, 2*stride, ...; fewer frames than the
/// window yields an empty result and a warning on `warn`.
inline std::vector<Concatenation> make_concatenations(const std::vector<Frame> &frames,
                                                      int window = kDefaultWindow, int stride = 1,
                                                      const std::string &provenance = {},
                                                      std::ostream *warn = &std::cerr) {
  if (window < 1)
    throw ArgumentError("window length T must be >= 1");
  if (stride < 1)
    throw ArgumentError("stride must be >= 1");
  std::vector<Concatenation> out;
  const std::size_t n = window_count(frames.size(), window, stride);
  if (n == 0) {
    if (warn)
      *warn << "warning: " << frames.size() << " frames is shorter than window " << window
            << "; no concatenations emitted\n";
    return out;
  }
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    Concatenation c;
    c.start_index = w * static_cast<std::size_t>(stride);
    c.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(c.start_index),
                    frames.begin() + static_cast<std::ptrdiff_t>(c.start_index + window));
    c.label = window_label(c.frames);
    c.provenance = provenance;
    out.push_back(std::move(c));
  }
  return out;
}

struct SplitPools {
  std::vector<Concatenation> train; // normal windows
  std::vector<Concatenation> test;  // anomalous windows
};

inline SplitPools split_normal_anomalous(const std::vector<Concatenation> &cs) {
  SplitPools pools;
  for (std::size_t n = 0; n < cs.size(); ++n) {
    switch (cs[n].label) {
    case FrameLabel::normal: pools.train.push_back(cs[n]); break;
    case FrameLabel::anomalous: pools.test.push_back(cs[n]); break;
    case FrameLabel::unlabeled:
      throw LabelingError("concatenation " + std::to_string(n) + " (start " +
                          std::to_string(cs[n].start_index) + ") is unlabeled");
    }
  }
  return pools;
}

} // namespace amxfer
