#include "iapf/core.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace iapf {

Heatmap::Heatmap(int w, int h, float fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

bool Heatmap::all_finite() const {
  return std::all_of(values.begin(), values.end(),
                     [](float v) { return std::isfinite(v); });
}

BinaryMask::BinaryMask(int w, int h, bool fill)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

GrayMask::GrayMask(int w, int h, double fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

GrayMask GrayMask::from_binary(const BinaryMask& m) {
  GrayMask g(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) g.values[i] = m.bits[i];
  return g;
}

void require_same_dims(int w1, int h1, int w2, int h2, const char* what) {
  if (w1 != w2 || h1 != h2) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(h1) + "x" +
                    std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                    std::to_string(w2));
  }
}

PixelRange pixel_range(const BBox& box, int width, int height) {
  // x0 <= x + 0.5 < x1  <=>  ceil(x0 - 0.5) <= x < ceil(x1 - 0.5)
  auto lo = [](double v) { return static_cast<long long>(std::ceil(v - 0.5)); };
  auto clip = [](long long v, int hi) {
    return static_cast<int>(std::clamp<long long>(v, 0, hi));
  };
  PixelRange r;
  r.x_begin = clip(lo(box.x0), width);
  r.x_end = clip(lo(box.x1), width);
  r.y_begin = clip(lo(box.y0), height);
  r.y_end = clip(lo(box.y1), height);
  return r;
}

bool box_order(const BBox& a, const BBox& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.y0, a.x0, a.y1, a.x1) < std::tie(b.y0, b.x0, b.y1, b.x1);
}

void sort_boxes(std::vector<BBox>& boxes) {
  std::stable_sort(boxes.begin(), boxes.end(), box_order);
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height, mask.width, {}};
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (std::uint8_t b : mask.bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v != current) {
      rle.counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) {
    throw Error(ErrorCode::InvalidArgument, "negative RLE size");
  }
  const std::uint64_t total =
      static_cast<std::uint64_t>(rle.height) * static_cast<std::uint64_t>(rle.width);
  std::uint64_t sum = 0;
  for (auto c : rle.counts) {
    sum += c;
    if (sum > total) break;
  }
  if (sum != total) {
    throw Error(ErrorCode::CountsMismatch,
                "counts sum " + std::to_string(sum) + " != " +
                    std::to_string(total));
  }
  BinaryMask m(rle.width, rle.height);
  std::size_t pos = 0;
  std::uint8_t v = 0;
  for (auto c : rle.counts) {
    std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>(pos), c, v);
    pos += c;
    v ^= 1;
  }
  return m;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a.width, a.height, b.width, b.height, "mask_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i], y = b.bits[i];
    inter += (x && y);
    uni += (x || y);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clamp_box(const BBox& b, const ImageRef& image) {
  BBox c = b;
  c.x0 = std::clamp(b.x0, 0.0, static_cast<double>(image.width));
  c.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image.width));
  c.y0 = std::clamp(b.y0, 0.0, static_cast<double>(image.height));
  c.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image.height));
  if (!(c.x1 - c.x0 >= 1.0) || !(c.y1 - c.y0 >= 1.0)) {
    throw Error(ErrorCode::DegenerateBox, "clipped box narrower than 1 pixel");
  }
  return c;
}

BBox full_image_box(const ImageRef& image, double score) {
  return BBox{0.0, 0.0, static_cast<double>(image.width),
              static_cast<double>(image.height), score};
}

std::optional<BBox> mask_bounds(const BinaryMask& m, double score) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  return BBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1), score};
}

}  // namespace iapf
