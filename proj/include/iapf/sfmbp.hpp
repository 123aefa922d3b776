#pragma once

// Single-foreground / multi-background point prompting: thresholded point
// selection inside one box, from one foreground heatmap and any number of
// background heatmaps.

#include <optional>
#include <span>
#include <vector>

#include "iapf/core.hpp"

namespace iapf::sfmbp {

struct Point {
  int x = 0;
  int y = 0;
  double confidence = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointPrompts {
  std::vector<Point> fg;
  std::vector<Point> bg;
};

struct SamplingConfig {
  double tau = 0.9;
  int k_fg = 3;
  int k_bg = 6;
  double d_min_frac = 0.05;  // of the box diagonal

  void validate() const;
};

// Min-max normalized heatmap values over exactly the pixels of a box.
struct NormalizedRegion {
  PixelRange range;
  std::vector<double> values;  // row-major over `range`

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y - range.y_begin) *
                      (range.x_end - range.x_begin) +
                  (x - range.x_begin)];
  }
};

// nullopt signals a constant region (max == min); the caller falls back.
std::optional<NormalizedRegion> normalize_in_box(const Heatmap& h, const BBox& box);

// Pixels inside the box whose normalized value reaches tau, before any cap,
// in descending-confidence order (ties by y, then x).
std::vector<Point> threshold_candidates(const Heatmap& h, const BBox& box, double tau);

std::vector<Point> sample_fg_points(const Heatmap& h_fg, const BBox& box,
                                    const SamplingConfig& cfg);

std::vector<Point> sample_bg_points(std::span<const Heatmap> h_bgs, const BBox& box,
                                    const SamplingConfig& cfg,
                                    std::span<const Point> fg);

PointPrompts sample_points(const Heatmap& h_fg, std::span<const Heatmap> h_bgs,
                           const BBox& box, const SamplingConfig& cfg);

}  // namespace iapf::sfmbp
