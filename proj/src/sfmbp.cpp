#include "iapf/sfmbp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

namespace iapf::sfmbp {

namespace {

bool point_order(const Point& a, const Point& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

PixelRange checked_range(const Heatmap& h, const BBox& box) {
  const PixelRange r = pixel_range(box, h.width, h.height);
  if (r.empty()) {
    throw Error(ErrorCode::DegenerateBox, "box covers no pixel centers");
  }
  return r;
}

// Greedy top-confidence subset honoring the count cap and minimum spacing.
std::vector<Point> select_spaced(const std::vector<Point>& sorted, int cap, double d_min) {
  std::vector<Point> out;
  const double d2 = d_min * d_min;
  for (const Point& p : sorted) {
    if (static_cast<int>(out.size()) >= cap) break;
    const bool far_enough = std::all_of(out.begin(), out.end(), [&](const Point& q) {
      const double dx = p.x - q.x, dy = p.y - q.y;
      return dx * dx + dy * dy >= d2;
    });
    if (far_enough) out.push_back(p);
  }
  return out;
}

double box_diagonal(const BBox& b) { return std::hypot(b.width(), b.height()); }

}  // namespace

void SamplingConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must be in (0,1]");
  if (k_fg < 1) throw Error(ErrorCode::InvalidArgument, "k_fg must be >= 1");
  if (k_bg < 0) throw Error(ErrorCode::InvalidArgument, "k_bg must be >= 0");
  if (!(d_min_frac >= 0.0 && d_min_frac <= 0.5)) {
    throw Error(ErrorCode::InvalidArgument, "d_min_frac must be in [0,0.5]");
  }
}

std::optional<NormalizedRegion> normalize_in_box(const Heatmap& h, const BBox& box) {
  const PixelRange r = checked_range(h, box);
  double lo = h.at(r.x_begin, r.y_begin), hi = lo;
  for (int y = r.y_begin; y < r.y_end; ++y) {
    for (int x = r.x_begin; x < r.x_end; ++x) {
      const double v = h.at(x, y);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) return std::nullopt;
  NormalizedRegion out{r, {}};
  out.values.reserve(r.size());
  const double span = hi - lo;
  for (int y = r.y_begin; y < r.y_end; ++y) {
    for (int x = r.x_begin; x < r.x_end; ++x) {
      out.values.push_back((static_cast<double>(h.at(x, y)) - lo) / span);
    }
  }
  return out;
}

std::vector<Point> threshold_candidates(const Heatmap& h, const BBox& box, double tau) {
  const auto region = normalize_in_box(h, box);
  std::vector<Point> out;
  if (!region) return out;
  const PixelRange& r = region->range;
  for (int y = r.y_begin; y < r.y_end; ++y) {
    for (int x = r.x_begin; x < r.x_end; ++x) {
      const double v = region->at(x, y);
      if (v >= tau) out.push_back({x, y, v});
    }
  }
  std::stable_sort(out.begin(), out.end(), point_order);
  return out;
}

std::vector<Point> sample_fg_points(const Heatmap& h_fg, const BBox& box,
                                    const SamplingConfig& cfg) {
  cfg.validate();
  auto candidates = threshold_candidates(h_fg, box, cfg.tau);
  if (candidates.empty()) {
    // Constant region: first maximal pixel in row-major order.
    const PixelRange r = checked_range(h_fg, box);
    Point best{r.x_begin, r.y_begin, 1.0};
    float best_v = h_fg.at(r.x_begin, r.y_begin);
    for (int y = r.y_begin; y < r.y_end; ++y) {
      for (int x = r.x_begin; x < r.x_end; ++x) {
        if (h_fg.at(x, y) > best_v) {
          best_v = h_fg.at(x, y);
          best = {x, y, 1.0};
        }
      }
    }
    return {best};
  }
  return select_spaced(candidates, cfg.k_fg, cfg.d_min_frac * box_diagonal(box));
}

std::vector<Point> sample_bg_points(std::span<const Heatmap> h_bgs, const BBox& box,
                                    const SamplingConfig& cfg,
                                    std::span<const Point> fg) {
  cfg.validate();
  std::map<std::pair<int, int>, double> merged;  // (y,x) -> max confidence
  for (const Heatmap& h : h_bgs) {
    for (const Point& p : threshold_candidates(h, box, cfg.tau)) {
      auto [it, inserted] = merged.emplace(std::pair{p.y, p.x}, p.confidence);
      if (!inserted) it->second = std::max(it->second, p.confidence);
    }
  }
  std::set<std::pair<int, int>> taken;
  for (const Point& p : fg) taken.emplace(p.y, p.x);

  std::vector<Point> candidates;
  candidates.reserve(merged.size());
  for (const auto& [yx, conf] : merged) {
    if (taken.contains(yx)) continue;
    candidates.push_back({yx.second, yx.first, conf});
  }
  std::stable_sort(candidates.begin(), candidates.end(), point_order);
  return select_spaced(candidates, cfg.k_bg, cfg.d_min_frac * box_diagonal(box));
}

PointPrompts sample_points(const Heatmap& h_fg, std::span<const Heatmap> h_bgs,
                           const BBox& box, const SamplingConfig& cfg) {
  PointPrompts p;
  p.fg = sample_fg_points(h_fg, box, cfg);
  p.bg = sample_bg_points(h_bgs, box, cfg, p.fg);
  return p;
}

}  // namespace iapf::sfmbp
