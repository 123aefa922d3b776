#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iapf/error.hpp"

namespace iapf {

struct ImageRef {
  std::string id;
  int width = 0;
  int height = 0;
  std::optional<std::filesystem::path> pixel_source;
};

// Continuous pixel coordinates, half-open [x0,x1) x [y0,y1).
// Pixel (x,y) belongs to the box when its center (x+0.5, y+0.5) does.
struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double score = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }

  bool contains_pixel(int x, int y) const {
    const double cx = x + 0.5, cy = y + 0.5;
    return x0 <= cx && cx < x1 && y0 <= cy && cy < y1;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Integer pixel range [x_begin,x_end) x [y_begin,y_end) covered by a box
// under the pixel-center rule, clipped to the image.
struct PixelRange {
  int x_begin = 0, y_begin = 0, x_end = 0, y_end = 0;

  bool empty() const { return x_begin >= x_end || y_begin >= y_end; }
  std::size_t size() const {
    return empty() ? 0
                   : static_cast<std::size_t>(x_end - x_begin) *
                         static_cast<std::size_t>(y_end - y_begin);
  }
};

PixelRange pixel_range(const BBox& box, int width, int height);

// Descending score, then ascending (y0, x0, y1, x1).
bool box_order(const BBox& a, const BBox& b);
void sort_boxes(std::vector<BBox>& boxes);

struct BoxSet {
  std::string tag;
  std::vector<BBox> boxes;
};

struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major

  Heatmap() = default;
  Heatmap(int w, int h, float fill = 0.0f);

  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  float& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  bool all_finite() const;

  friend bool operator==(const Heatmap&, const Heatmap&) = default;
};

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false);

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  bool empty_foreground() const { return count() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

struct GrayMask {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, each in [0,1]

  GrayMask() = default;
  GrayMask(int w, int h, double fill = 0.0);

  double at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  static GrayMask from_binary(const BinaryMask& m);
};

struct InstanceMaskStack {
  std::vector<BinaryMask> masks;
  std::vector<BBox> boxes;  // provenance, parallel to masks

  std::size_t size() const { return masks.size(); }
  bool empty() const { return masks.empty(); }
};

// Row-major run lengths beginning with a (possibly empty) zero-run.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

double mask_iou(const BinaryMask& a, const BinaryMask& b);
double box_iou(const BBox& a, const BBox& b);

BBox clamp_box(const BBox& b, const ImageRef& image);
BBox full_image_box(const ImageRef& image, double score = 0.0);

// Tight box around the set pixels; nullopt for an empty mask.
std::optional<BBox> mask_bounds(const BinaryMask& m, double score = 1.0);

void require_same_dims(int w1, int h1, int w2, int h2, const char* what);

}  // namespace iapf
