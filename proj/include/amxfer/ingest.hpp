#pragma once

// Loads real melt-pool image sequences: grayscale conversion, cropping,
// resizing and global byte-range normalization, plus rotation/scale
// augmentation.
//
// Normalization divides by the full range of the pixel type (255 for 8-bit,
// 65535 for 16-bit); it never rescales per frame, so absolute intensity cues
// survive for anomaly scoring.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "amxfer/dataset_io.hpp"

namespace amxfer {

struct Roi {
  int x = 0, y = 0, w = 0, h = 0;
};

struct Augmentation {
  enum class Kind { rotation, scale };
  Kind kind = Kind::rotation;
  double value = 0.0; // degrees (counter-clockwise) or zoom factor

  std::string tag() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%g", kind == Kind::rotation ? "rotation" : "scale", value);
    return buf;
  }

  /// {"name": "rotation", "degrees": 90} or {"name": "scale", "factor": 1.2}
  static Augmentation from_json(const Json &j) {
    const std::string name = j.value("name", std::string());
    if (name == "rotation")
      return {Kind::rotation, j.at("degrees").get<double>()};
    if (name == "scale") {
      double f = j.at("factor").get<double>();
      if (!(f > 0))
        throw ArgumentError("scale augmentation factor must be positive");
      return {Kind::scale, f};
    }
    throw ArgumentError("unsupported augmentation '" + name + "'");
  }
};

enum class Ordering { by_manifest, by_filename };

struct IngestSpec {
  fs::path source_dir;
  Ordering ordering = Ordering::by_filename;
  std::optional<Roi> roi;
  bool to_grayscale = true;
  std::optional<std::pair<int, int>> resize_to; // (H, W)
  bool normalize = true;
  std::vector<Augmentation> augmentations;
  std::string labels_file = "labels.json"; // optional sidecar inside source_dir
  std::string process_tag = "ingested";
};

inline constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

namespace detail {

inline float sample_bilinear(const Image &img, double y, double x) {
  if (y < -0.5 || x < -0.5 || y > img.height - 0.5 || x > img.width - 0.5)
    return 0.0f;
  y = std::clamp(y, 0.0, img.height - 1.0);
  x = std::clamp(x, 0.0, img.width - 1.0);
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0, fx = x - x0;
  return static_cast<float>((1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                            fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1)));
}

inline Image load_image(const fs::path &path, bool to_grayscale, bool normalize) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty())
    throw IngestError("unreadable image " + path.string());
  double scale = 1.0;
  if (normalize)
    scale = m.depth() == CV_8U ? 1.0 / 255.0 : m.depth() == CV_16U ? 1.0 / 65535.0 : 1.0;
  cv::Mat f;
  m.convertTo(f, CV_MAKETYPE(CV_64F, m.channels()), scale);
  Image img(f.rows, f.cols);
  const int ch = f.channels();
  if (ch != 1 && !to_grayscale)
    throw IngestError(path.string() + ": colour image requires to_grayscale");
  if (ch != 1 && ch != 3 && ch != 4)
    throw IngestError(path.string() + ": unsupported channel count");
  for (int y = 0; y < f.rows; ++y) {
    const double *row = f.ptr<double>(y);
    for (int x = 0; x < f.cols; ++x) {
      const double *px = row + x * ch;
      // OpenCV stores colour pixels as B, G, R[, A].
      double v = ch == 1 ? px[0] : kLumaR * px[2] + kLumaG * px[1] + kLumaB * px[0];
      img.at(y, x) = static_cast<float>(v);
    }
  }
  return img;
}

} // namespace detail

inline Image crop(const Image &img, const Roi &roi) {
  if (roi.x < 0 || roi.y < 0 || roi.w <= 0 || roi.h <= 0 || roi.x + roi.w > img.width ||
      roi.y + roi.h > img.height)
    throw ArgumentError("roi out of image bounds");
  Image out(roi.h, roi.w);
  for (int y = 0; y < roi.h; ++y)
    for (int x = 0; x < roi.w; ++x)
      out.at(y, x) = img.at(roi.y + y, roi.x + x);
  return out;
}

/// Bilinear resize with half-pixel centers.
inline Image resize(const Image &img, int height, int width) {
  Image out(height, width);
  const double sy = static_cast<double>(img.height) / height;
  const double sx = static_cast<double>(img.width) / width;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      out.at(y, x) = detail::sample_bilinear(img, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
  return out;
}

/// Counter-clockwise rotation about the frame center; quarter turns of square
/// frames are exact index permutations, e.g. F'(r, c) = F(c, H-1-r) for 90.
inline Image rotate(const Image &img, double degrees) {
  const double turns = degrees / 90.0;
  const long quarter = std::lround(turns);
  if (std::abs(turns - quarter) < 1e-12 && img.height == img.width) {
    const int q = static_cast<int>(((quarter % 4) + 4) % 4);
    const int n = img.height;
    Image out(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        switch (q) {
        case 0: out.at(r, c) = img.at(r, c); break;
        case 1: out.at(r, c) = img.at(c, n - 1 - r); break;
        case 2: out.at(r, c) = img.at(n - 1 - r, n - 1 - c); break;
        case 3: out.at(r, c) = img.at(n - 1 - c, r); break;
        }
      }
    return out;
  }
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
  Image out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      const double u = c - cx, v = r - cy;
      out.at(r, c) = detail::sample_bilinear(img, sn * u + cs * v + cy, cs * u - sn * v + cx);
    }
  return out;
}

/// Zoom about the frame center; areas sampled from outside the frame are 0.
inline Image scale(const Image &img, double factor) {
  const double cy = (img.height - 1) / 2.0, cx = (img.width - 1) / 2.0;
  Image out(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      out.at(r, c) = detail::sample_bilinear(img, (r - cy) / factor + cy, (c - cx) / factor + cx);
  return out;
}

inline Image apply(const Augmentation &a, const Image &img) {
  return a.kind == Augmentation::Kind::rotation ? rotate(img, a.value) : scale(img, a.value);
}

/// Originals followed by one augmented copy of every frame per augmentation.
/// Copy a is shifted to layers [(a+1)L, (a+2)L) so (i, j, k) stays unique.
inline BuildDataset apply_augmentations(const BuildDataset &ds,
                                        const std::vector<Augmentation> &augs) {
  if (augs.empty())
    return ds;
  BuildDataset out = ds;
  out.frames.reserve(ds.frames.size() * (augs.size() + 1));
  for (std::size_t a = 0; a < augs.size(); ++a) {
    for (const auto &f : ds.frames) {
      Frame g = f;
      g.image = apply(augs[a], f.image);
      g.layer += static_cast<int>(a + 1) * ds.layers;
      g.provenance += (g.provenance.empty() ? "" : "|") + augs[a].tag();
      out.frames.push_back(std::move(g));
    }
  }
  out.layers = ds.layers * static_cast<int>(augs.size() + 1);
  return out;
}

inline BuildDataset ingest(const IngestSpec &spec) {
  if (!fs::is_directory(spec.source_dir))
    throw IngestError("source directory does not exist: " + spec.source_dir.string());
  if (spec.resize_to && (spec.resize_to->first <= 0 || spec.resize_to->second <= 0 ||
                         spec.resize_to->first % 4 != 0 || spec.resize_to->second % 4 != 0))
    throw ArgumentError("resize_to must be positive and divisible by 4");

  struct Entry {
    fs::path file;
    int layer = 0, control = 0, time = 0;
  };
  std::vector<Entry> entries;
  if (spec.ordering == Ordering::by_manifest) {
    Json manifest = read_json_file(spec.source_dir / "manifest.json");
    for (const auto &e : manifest.at("frames"))
      entries.push_back({e.at("file").get<std::string>(), e.value("layer", 0),
                         e.value("control", 0), e.value("time", 0)});
  } else {
    std::vector<fs::path> files;
    for (const auto &de : fs::directory_iterator(spec.source_dir)) {
      if (!de.is_regular_file())
        continue;
      std::string ext = de.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png" || ext == ".tif" || ext == ".tiff")
        files.push_back(de.path().filename());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t n = 0; n < files.size(); ++n)
      entries.push_back({files[n], 0, 0, static_cast<int>(n)});
  }
  if (entries.empty())
    throw IngestError("no images found in " + spec.source_dir.string());

  Json labels = Json::object();
  if (!spec.labels_file.empty() && fs::exists(spec.source_dir / spec.labels_file))
    labels = read_json_file(spec.source_dir / spec.labels_file);

  BuildDataset ds;
  ds.process_tag = spec.process_tag;
  for (const auto &e : entries) {
    Image img = detail::load_image(spec.source_dir / e.file, spec.to_grayscale, spec.normalize);
    if (spec.roi)
      img = crop(img, *spec.roi);
    if (spec.resize_to)
      img = resize(img, spec.resize_to->first, spec.resize_to->second);
    for (float v : img.pixels)
      if (!(v >= 0.0f && v <= 1.0f))
        throw IngestError(e.file.string() + ": intensities outside [0, 1]; enable normalize");
    Frame f;
    f.image = std::move(img);
    f.layer = e.layer;
    f.control = e.control;
    f.time = e.time;
    f.provenance = e.file.string();
    if (auto it = labels.find(e.file.string()); it != labels.end()) {
      f.label = parse_frame_label(it->value("label", std::string("unlabeled")));
      for (const auto &k : it->value("anomaly_kinds", Json::array()))
        f.anomaly_kinds.insert(parse_anomaly_kind(k.get<std::string>()));
    }
    ds.frames.push_back(std::move(f));
  }
  ds.fit_bounds();
  ds.validate();
  return apply_augmentations(ds, spec.augmentations);
}

} // namespace amxfer
