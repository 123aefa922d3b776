#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "iapf/io.hpp"
#include "support.hpp"

using namespace iapf;
using testing_support::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(Iahm, RoundTripIsBitExact) {
  Heatmap h(3, 2);
  h.values = {0.0f, 1.0f, 0.1f, 1e-30f, 0.333333343f, 0.999999940f};
  const std::string bytes = io::encode_iahm(h);
  ASSERT_EQ(bytes.size(), 12u + 6 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "IAHM");
  // u32le height then width
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);
  EXPECT_EQ(io::decode_iahm(bytes), h);
}

TEST(Iahm, CorruptInputs) {
  Heatmap h(2, 2, 0.5f);
  const std::string good = io::encode_iahm(h);
  EXPECT_EQ(code_of([&] { io::decode_iahm(good.substr(0, good.size() - 1)); }), ErrorCode::FixtureCorrupt);
  EXPECT_EQ(code_of([&] { io::decode_iahm(good + "xxxx"); }), ErrorCode::FixtureCorrupt);
  EXPECT_EQ(code_of([&] { io::decode_iahm("IAHN" + good.substr(4)); }), ErrorCode::FixtureCorrupt);
  Heatmap bad = h;
  bad.values[1] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(code_of([&] { io::decode_iahm(io::encode_iahm(bad)); }), ErrorCode::FixtureCorrupt);
}

TEST(Base64, RoundTrip) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 40; ++n) {
    std::string s(static_cast<std::size_t>(n), '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xff);
    EXPECT_EQ(io::base64_decode(io::base64_encode(s)), s);
  }
  EXPECT_EQ(io::base64_encode("ab"), "YWI=");
  EXPECT_EQ(code_of([] { io::base64_decode("YWI"); }), ErrorCode::Protocol);
  EXPECT_EQ(code_of([] { io::base64_decode("Y!I="); }), ErrorCode::Protocol);
}

TEST(RleJson, Validation) {
  const RleMask r{2, 3, {1, 2, 3}};
  EXPECT_EQ(io::rle_from_json(io::rle_to_json(r)), r);
  EXPECT_EQ(code_of([] { io::rle_from_json(io::json{{"size", {2, 2}}}); }), ErrorCode::FixtureCorrupt);
  EXPECT_EQ(code_of([] {
              io::rle_from_json(io::json{{"size", {2, 2}}, {"counts", {4}}, {"order", "column-major"}});
            }),
            ErrorCode::FixtureCorrupt);
  EXPECT_EQ(code_of([] { io::rle_from_json(io::json{{"size", {2, -1}}, {"counts", {4}}}); }),
            ErrorCode::FixtureCorrupt);
}

TEST(BoxJson, Validation) {
  const BBox b{1.25, 2, 3, 4.5, 0.75};
  EXPECT_EQ(io::box_from_json(io::box_to_json(b)), b);
  EXPECT_EQ(code_of([] { io::box_from_json(io::json{{"x0", 0}, {"y0", 0}, {"x1", 1}, {"y1", 1}}); }),
            ErrorCode::FixtureCorrupt);
  EXPECT_EQ(code_of([] {
              io::box_from_json(io::json{{"x0", 0}, {"y0", 0}, {"x1", 1}, {"y1", 1}, {"score", 1.5}});
            }),
            ErrorCode::FixtureCorrupt);
}

TEST(Png, MaskRoundTripAndThresholds) {
  TempDir dir;
  BinaryMask m(5, 3);
  m.set(1, 1);
  m.set(4, 2);
  io::write_mask_png(dir / "m.png", m);
  EXPECT_EQ(io::read_binary_mask(dir / "m.png"), m);
  const GrayMask g = io::read_gray_mask(dir / "m.png");
  EXPECT_DOUBLE_EQ(g.at(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(g.at(0, 0), 0.0);

  const std::vector<std::uint8_t> px = {0, 127, 128, 255};
  io::write_gray_png(dir / "g.png", 4, 1, px);
  const BinaryMask b = io::read_binary_mask(dir / "g.png");
  EXPECT_EQ(b.bits, (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_DOUBLE_EQ(io::read_gray_mask(dir / "g.png").at(1, 0), 127.0 / 255.0);
  int w = 0, h = 0;
  io::probe_image_size(dir / "g.png", w, h);
  EXPECT_EQ(w, 4);
  EXPECT_EQ(h, 1);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
