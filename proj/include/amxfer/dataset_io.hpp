#pragma once

// On-disk dataset: a JSON manifest listing frame image files with their
// (layer, control, time) indices, labels and anomaly kinds.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "amxfer/frame.hpp"

namespace amxfer {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;

inline Json read_json_file(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const Json &doc, const fs::path &path) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

/// Writes an 8-bit grayscale PNG; values are clamped to [0, 1].
inline void write_png(const Image &img, const fs::path &path) {
  cv::Mat m(img.height, img.width, CV_8UC1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
          std::lround(std::clamp(static_cast<double>(img.at(y, x)), 0.0, 1.0) * 255.0));
  if (!cv::imwrite(path.string(), m))
    throw IoError("cannot write image " + path.string());
}

inline Json frame_entry(const Frame &f, const std::string &file) {
  Json kinds = Json::array();
  for (auto k : f.anomaly_kinds)
    kinds.push_back(std::string(to_string(k)));
  Json e = {{"file", file},
            {"layer", f.layer},
            {"control", f.control},
            {"time", f.time},
            {"label", std::string(to_string(f.label))},
            {"anomaly_kinds", std::move(kinds)}};
  if (!f.provenance.empty())
    e["provenance"] = f.provenance;
  return e;
}

/// Writes `dir/manifest.json` plus one PNG per frame under `dir/frames`.
inline void write_dataset(const BuildDataset &ds, const fs::path &dir) {
  ds.validate();
  fs::create_directories(dir / "frames");
  Json frames = Json::array();
  int h = 0, w = 0;
  for (std::size_t n = 0; n < ds.frames.size(); ++n) {
    char name[32];
    std::snprintf(name, sizeof name, "frames/%06zu.png", n);
    write_png(ds.frames[n].image, dir / name);
    frames.push_back(frame_entry(ds.frames[n], name));
    h = ds.frames[n].image.height;
    w = ds.frames[n].image.width;
  }
  Json manifest = {{"schema_version", kManifestSchemaVersion},
                   {"kind", "amxfer.dataset"},
                   {"process_tag", ds.process_tag},
                   {"height", h},
                   {"width", w},
                   {"bounds",
                    {{"layers", ds.layers},
                     {"control_steps", ds.control_steps},
                     {"time_steps", ds.time_steps}}},
                   {"frames", std::move(frames)}};
  write_json_file(manifest, dir / "manifest.json");
}

/// Reads a grayscale frame and scales 8/16-bit integers to [0, 1].
inline Image read_gray_image(const fs::path &path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty())
    throw IngestError("unreadable image " + path.string());
  if (m.channels() != 1)
    throw IngestError("expected single-channel image " + path.string());
  const double scale = m.depth() == CV_8U ? 255.0 : m.depth() == CV_16U ? 65535.0 : 1.0;
  cv::Mat f;
  m.convertTo(f, CV_64F);
  Image img(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y)
    for (int x = 0; x < f.cols; ++x)
      img.at(y, x) = static_cast<float>(f.at<double>(y, x) / scale);
  return img;
}

inline Frame parse_frame_entry(const Json &e, const fs::path &dir, std::size_t n) {
  const std::string where = "frames[" + std::to_string(n) + "]";
  try {
    Frame f;
    f.layer = e.at("layer").get<int>();
    f.control = e.at("control").get<int>();
    f.time = e.at("time").get<int>();
    f.label = parse_frame_label(e.value("label", std::string("unlabeled")));
    for (const auto &k : e.value("anomaly_kinds", Json::array()))
      f.anomaly_kinds.insert(parse_anomaly_kind(k.get<std::string>()));
    f.provenance = e.value("provenance", std::string());
    f.image = read_gray_image(dir / e.at("file").get<std::string>());
    return f;
  } catch (const Json::exception &ex) {
    throw ValidationError(where + ": " + ex.what());
  }
}

inline BuildDataset read_dataset(const fs::path &dir) {
  Json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("schema_version", 0) != kManifestSchemaVersion)
    throw ValidationError("manifest schema_version: unsupported");
  BuildDataset ds;
  ds.process_tag = manifest.value("process_tag", std::string());
  const Json &frames = manifest.at("frames");
  ds.frames.reserve(frames.size());
  for (std::size_t n = 0; n < frames.size(); ++n)
    ds.frames.push_back(parse_frame_entry(frames[n], dir, n));
  if (auto it = manifest.find("bounds"); it != manifest.end()) {
    ds.layers = it->value("layers", 1);
    ds.control_steps = it->value("control_steps", 1);
    ds.time_steps = it->value("time_steps", 1);
  } else {
    ds.fit_bounds();
  }
  ds.validate();
  return ds;
}

} // namespace amxfer
