#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "amxfer/knowledge.hpp"
#include "amxfer/structure.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return AMXFER_DATA_DIR; }

inline amxfer::KnowledgeContext lpbf() {
  return amxfer::load_context_file(data_dir() / "contexts" / "lpbf_nist.json");
}
inline amxfer::KnowledgeContext ded() {
  return amxfer::load_context_file(data_dir() / "contexts" / "ded_msu.json");
}

inline std::filesystem::path temp_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("amxfer_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline amxfer::Frame frame(int h, int w, float value, amxfer::FrameLabel label,
                           int time = 0) {
  amxfer::Frame f;
  f.image = amxfer::Image(h, w, value);
  f.label = label;
  f.time = time;
  return f;
}

/// Windows of random frames in [lo, hi], all labeled `label`.
inline std::vector<amxfer::Concatenation> random_windows(std::size_t n, int T, int h, int w,
                                                         std::uint64_t seed, float lo = 0.0f,
                                                         float hi = 1.0f,
                                                         amxfer::FrameLabel label =
                                                             amxfer::FrameLabel::normal) {
  std::mt19937_64 rng(seed);
  std::vector<amxfer::Concatenation> out;
  for (std::size_t i = 0; i < n; ++i) {
    amxfer::Concatenation c;
    c.start_index = i;
    c.label = label;
    for (int t = 0; t < T; ++t) {
      amxfer::Frame f = frame(h, w, 0.0f, label, t);
      for (auto &p : f.image.pixels)
        p = lo + (hi - lo) * static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
      c.frames.push_back(std::move(f));
    }
    out.push_back(std::move(c));
  }
  return out;
}

} // namespace testutil
