#include <gtest/gtest.h>

#include <random>

#include "iapf/core.hpp"
#include "support.hpp"

using namespace iapf;
using testing_support::mask_from;

TEST(Rle, EncodeExamples) {
  EXPECT_EQ(rle_encode(BinaryMask(2, 2)).counts, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(rle_encode(mask_from(2, 2, {1, 0, 0, 1})).counts, (std::vector<std::uint64_t>{0, 1, 2, 1}));
  EXPECT_EQ(rle_encode(mask_from(3, 1, {0, 1, 1})).counts, (std::vector<std::uint64_t>{1, 2}));
}

TEST(Rle, DecodeExamples) {
  EXPECT_EQ(rle_decode(RleMask{2, 2, {4}}), BinaryMask(2, 2));
  EXPECT_EQ(rle_decode(RleMask{2, 2, {0, 4}}), BinaryMask(2, 2, true));
  EXPECT_EQ(rle_decode(RleMask{1, 3, {1, 2}}), mask_from(3, 1, {0, 1, 1}));
}

TEST(Rle, CountsMustCoverTheMask) {
  for (const auto& counts : {std::vector<std::uint64_t>{3}, std::vector<std::uint64_t>{2, 3},
                             std::vector<std::uint64_t>{}}) {
    try {
      rle_decode(RleMask{2, 2, counts});
      FAIL() << "expected CountsMismatch";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::CountsMismatch);
    }
  }
}

TEST(Rle, RoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 300; ++t) {
    const int w = 1 + testing_support::below(rng, 12), h = 1 + testing_support::below(rng, 12);
    const auto m = testing_support::random_mask(rng, w, h, testing_support::unit(rng));
    const RleMask r = rle_encode(m);
    std::uint64_t total = 0;
    for (auto c : r.counts) total += c;
    EXPECT_EQ(total, static_cast<std::uint64_t>(w) * h);
    for (std::size_t i = 1; i < r.counts.size(); ++i) EXPECT_GT(r.counts[i], 0u);
    EXPECT_EQ(rle_decode(r), m);
  }
}

TEST(MaskIou, Examples) {
  const auto a = mask_from(4, 2, {1, 1, 1, 1, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, mask_from(4, 2, {0, 0, 0, 0, 1, 1, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, mask_from(4, 2, {0, 0, 1, 1, 1, 1, 0, 0})), 2.0 / 6.0);
  EXPECT_DOUBLE_EQ(mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
}

TEST(MaskIou, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto a = testing_support::random_mask(rng, 5, 4, 0.4);
    const auto b = testing_support::random_mask(rng, 5, 4, 0.4);
    const double ab = mask_iou(a, b);
    EXPECT_DOUBLE_EQ(ab, mask_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(MaskIou, DimensionMismatch) {
  try {
    mask_iou(BinaryMask(2, 2), BinaryMask(3, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(BoxIou, Examples) {
  const BBox a{0, 0, 2, 2, 1};
  EXPECT_DOUBLE_EQ(box_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(box_iou(a, BBox{5, 5, 6, 6, 1}), 0.0);
  EXPECT_DOUBLE_EQ(box_iou(a, BBox{1, 1, 3, 3, 1}), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(box_iou(a, BBox{2, 0, 4, 2, 1}), 0.0);  // touching edges
}

TEST(ClampBox, Examples) {
  const ImageRef img{"x", 8, 8, {}};
  const BBox c = clamp_box(BBox{-5, -5, 10, 10, 0.5}, img);
  EXPECT_EQ(c, (BBox{0, 0, 8, 8, 0.5}));
  const BBox in{1, 2, 3.5, 7, 0.3};
  EXPECT_EQ(clamp_box(in, img), in);
  try {
    clamp_box(BBox{7.5, 0, 20, 4, 1}, img);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateBox);
  }
}

TEST(PixelRange, CenterRule) {
  // Pixel x is inside when x0 <= x + 0.5 < x1.
  auto r = pixel_range(BBox{0.5, 0.5, 2.5, 1.5, 1}, 10, 10);
  EXPECT_EQ(r.x_begin, 0);
  EXPECT_EQ(r.x_end, 2);
  EXPECT_EQ(r.y_begin, 0);
  EXPECT_EQ(r.y_end, 1);
  r = pixel_range(BBox{0.6, 0, 2.6, 1, 1}, 10, 10);
  EXPECT_EQ(r.x_begin, 1);
  EXPECT_EQ(r.x_end, 3);
  EXPECT_TRUE(pixel_range(BBox{0.6, 0, 1.4, 1, 1}, 10, 10).empty());
}

TEST(PixelRange, AgreesWithContainsPixel) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    const double x0 = testing_support::unit(rng) * 12 - 2, y0 = testing_support::unit(rng) * 12 - 2;
    const BBox b{x0, y0, x0 + testing_support::unit(rng) * 8, y0 + testing_support::unit(rng) * 8, 1};
    const PixelRange r = pixel_range(b, 10, 9);
    for (int y = 0; y < 9; ++y) {
      for (int x = 0; x < 10; ++x) {
        const bool in_range = x >= r.x_begin && x < r.x_end && y >= r.y_begin && y < r.y_end;
        EXPECT_EQ(in_range, b.contains_pixel(x, y));
      }
    }
  }
}

TEST(BoxOrder, ScoreThenPosition) {
  std::vector<BBox> boxes = {{5, 0, 6, 1, 0.5}, {0, 3, 1, 4, 0.9}, {0, 0, 1, 1, 0.5}, {0, 0, 2, 1, 0.5}};
  sort_boxes(boxes);
  EXPECT_EQ(boxes[0].score, 0.9);
  EXPECT_EQ(boxes[1], (BBox{0, 0, 1, 1, 0.5}));
  EXPECT_EQ(boxes[2], (BBox{0, 0, 2, 1, 0.5}));
  EXPECT_EQ(boxes[3], (BBox{5, 0, 6, 1, 0.5}));
}

TEST(MaskBounds, TightBox) {
  EXPECT_FALSE(mask_bounds(BinaryMask(3, 3)).has_value());
  const auto b = mask_bounds(mask_from(4, 3, {0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0}));
  ASSERT_TRUE(b);
  EXPECT_EQ(*b, (BBox{1, 1, 3, 3, 1.0}));
}
