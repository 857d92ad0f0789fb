#pragma once

// Line charts rendered with OpenCV: loss curves and regularity-vs-index with
// the detection threshold.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "amxfer/error.hpp"
#include "amxfer/scoring.hpp"

namespace amxfer::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct Chart {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  std::vector<double> hlines; // horizontal reference lines
  std::vector<double> vlines; // vertical phase boundaries
  bool log_y = false;
  int width = 800, height = 480;
};

namespace detail {

inline const cv::Scalar kColors[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},
                                     {40, 39, 214},  {189, 103, 148}, {75, 86, 140}};

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

} // namespace detail

inline cv::Mat render(const Chart &c) {
  cv::Mat img(c.height, c.width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int left = 80, right = 20, top = 40, bottom = 50;
  const int pw = c.width - left - right, ph = c.height - top - bottom;
  auto ty = [&](double v) { return c.log_y ? std::log10(std::max(v, 1e-12)) : v; };

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto &s : c.series)
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i]))
        continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  for (double h : c.hlines) {
    y0 = std::min(y0, ty(h));
    y1 = std::max(y1, ty(h));
  }
  if (x0 > x1) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 == x0)
    x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x, double y) {
    return cv::Point(left + static_cast<int>(std::lround((x - x0) / (x1 - x0) * pw)),
                     top + static_cast<int>(std::lround((1.0 - (ty(y) - y0) / (y1 - y0)) * ph)));
  };

  const cv::Scalar axis(60, 60, 60), grid(225, 225, 225);
  const auto font = cv::FONT_HERSHEY_SIMPLEX;
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0;
    const int yp = top + ph - ph * k / 4;
    cv::line(img, {left, yp}, {left + pw, yp}, grid, 1);
    cv::putText(img, detail::tick(c.log_y ? std::pow(10.0, yv) : yv), {5, yp + 4}, font, 0.4,
                axis, 1, cv::LINE_AA);
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const int xp = left + pw * k / 4;
    cv::putText(img, detail::tick(xv), {xp - 10, top + ph + 18}, font, 0.4, axis, 1, cv::LINE_AA);
  }
  cv::rectangle(img, {left, top}, {left + pw, top + ph}, axis, 1);
  cv::putText(img, c.title, {left, 25}, font, 0.6, axis, 1, cv::LINE_AA);
  cv::putText(img, c.x_label, {left + pw / 2 - 30, c.height - 10}, font, 0.45, axis, 1, cv::LINE_AA);
  cv::putText(img, c.y_label, {5, top - 8}, font, 0.45, axis, 1, cv::LINE_AA);

  for (double v : c.vlines) {
    const int xp = px(v, y0).x;
    cv::line(img, {xp, top}, {xp, top + ph}, cv::Scalar(150, 150, 150), 1, cv::LINE_4);
  }
  for (double h : c.hlines) {
    const int yp = px(x0, h).y;
    for (int xp = left; xp < left + pw; xp += 12)
      cv::line(img, {xp, yp}, {std::min(xp + 6, left + pw), yp}, cv::Scalar(0, 0, 200), 1);
  }
  for (std::size_t k = 0; k < c.series.size(); ++k) {
    const auto &s = c.series[k];
    const cv::Scalar col = detail::kColors[k % std::size(detail::kColors)];
    for (std::size_t i = 1; i < s.y.size(); ++i)
      cv::line(img, px(s.x[i - 1], s.y[i - 1]), px(s.x[i], s.y[i]), col, 2, cv::LINE_AA);
    if (s.y.size() == 1)
      cv::circle(img, px(s.x[0], s.y[0]), 3, col, -1);
    const int ly = top + 16 + 18 * static_cast<int>(k);
    cv::line(img, {left + pw - 170, ly - 4}, {left + pw - 150, ly - 4}, col, 2);
    cv::putText(img, s.label, {left + pw - 145, ly}, font, 0.4, axis, 1, cv::LINE_AA);
  }
  return img;
}

inline void save(const Chart &c, const std::filesystem::path &path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), render(c)))
    throw IoError("cannot write plot " + path.string());
}

inline Series indexed(std::string label, const std::vector<double> &y, double x_start = 0) {
  Series s{std::move(label), {}, y};
  for (std::size_t i = 0; i < y.size(); ++i)
    s.x.push_back(x_start + static_cast<double>(i));
  return s;
}

/// Regularity of each scored window against its index, threshold dashed.
inline Chart regularity_chart(const RegularityReport &r, const std::string &title) {
  Chart c;
  c.title = title;
  c.x_label = "window index";
  c.y_label = is_regularity_rule(r.config.rule) ? "regularity score" : "reconstruction cost";
  std::vector<double> y;
  for (const auto &w : r.items)
    y.push_back(is_regularity_rule(r.config.rule) ? clamp_display(w.sr) : w.r);
  c.series.push_back(indexed("test windows", y));
  c.hlines.push_back(r.threshold);
  return c;
}

} // namespace amxfer::plot
