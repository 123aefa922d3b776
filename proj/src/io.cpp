#include "iapf/io.hpp"

#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <png.h>

namespace iapf::io {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  }
  return v;
}

constexpr std::string_view kIahmMagic = "IAHM";

Error corrupt(const std::string& what) { return Error(ErrorCode::FixtureCorrupt, what); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return f;
}

}  // namespace

std::string encode_heatmap_body(const Heatmap& h) {
  std::string out;
  out.reserve(h.values.size() * 4);
  for (float v : h.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Heatmap decode_heatmap_body(std::string_view bytes, int width, int height) {
  if (width < 1 || height < 1) throw corrupt("heatmap size must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != n * 4) {
    throw corrupt("heatmap payload holds " + std::to_string(bytes.size()) +
                  " bytes, expected " + std::to_string(n * 4));
  }
  Heatmap h(width, height);
  for (std::size_t i = 0; i < n; ++i) {
    h.values[i] = std::bit_cast<float>(get_u32(bytes, i * 4));
    if (!std::isfinite(h.values[i])) throw corrupt("non-finite heatmap value");
  }
  return h;
}

std::string encode_iahm(const Heatmap& h) {
  std::string out(kIahmMagic);
  put_u32(out, static_cast<std::uint32_t>(h.height));
  put_u32(out, static_cast<std::uint32_t>(h.width));
  out += encode_heatmap_body(h);
  return out;
}

Heatmap decode_iahm(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != kIahmMagic) {
    throw corrupt("missing IAHM header");
  }
  const std::uint32_t height = get_u32(bytes, 4);
  const std::uint32_t width = get_u32(bytes, 8);
  if (height == 0 || width == 0 || height > (1u << 16) || width > (1u << 16)) {
    throw corrupt("implausible IAHM size");
  }
  return decode_heatmap_body(bytes.substr(12), static_cast<int>(width),
                             static_cast<int>(height));
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::Protocol, "base64 length not a multiple of 4");
  }
  if (text.empty()) return {};
  std::string out(3 * (text.size() / 4), '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::Protocol, "invalid base64");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

json rle_to_json(const RleMask& rle) {
  return json{{"size", {rle.height, rle.width}},
              {"counts", rle.counts},
              {"order", "row-major"},
              {"start", "zero"}};
}

RleMask rle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts")) {
    throw corrupt("RLE object needs size and counts");
  }
  const auto& size = j.at("size");
  const auto non_negative = [](const json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; };
  if (!size.is_array() || size.size() != 2 || !non_negative(size[0]) || !non_negative(size[1])) {
    throw corrupt("RLE size must be [H,W] of non-negative integers");
  }
  if (j.contains("order") && j.at("order") != "row-major") {
    throw corrupt("unsupported RLE order");
  }
  if (j.contains("start") && j.at("start") != "zero") {
    throw corrupt("unsupported RLE start");
  }
  RleMask rle;
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  const auto& counts = j.at("counts");
  if (!counts.is_array()) throw corrupt("RLE counts must be an array");
  rle.counts.reserve(counts.size());
  for (const auto& c : counts) {
    if (!non_negative(c)) throw corrupt("RLE counts must be non-negative integers");
    rle.counts.push_back(c.get<std::uint64_t>());
  }
  return rle;
}

json box_to_json(const BBox& b) {
  return json{{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}, {"score", b.score}};
}

BBox box_from_json(const json& j) {
  if (!j.is_object()) throw corrupt("box must be an object");
  BBox b;
  try {
    b.x0 = j.at("x0").get<double>();
    b.y0 = j.at("y0").get<double>();
    b.x1 = j.at("x1").get<double>();
    b.y1 = j.at("y1").get<double>();
    b.score = j.at("score").get<double>();
  } catch (const json::exception& e) {
    throw corrupt(std::string("bad box: ") + e.what());
  }
  if (!std::isfinite(b.x0) || !std::isfinite(b.y0) || !std::isfinite(b.x1) ||
      !std::isfinite(b.y1) || !(b.score >= 0.0 && b.score <= 1.0)) {
    throw corrupt("box coordinates must be finite and score in [0,1]");
  }
  return b;
}

// ---- PNG ------------------------------------------------------------------

void write_gray_png(const fs::path& path, int width, int height,
                    std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer size mismatch");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> px(mask.bits.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = mask.bits[i] ? 255 : 0;
  write_gray_png(path, mask.width, mask.height, px);
}

std::vector<std::uint8_t> read_gray_png(const fs::path& path, int& width, int& height) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng init failed");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "PNG decode failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "unexpected PNG layout after conversion: " + path.string());
  }
  out.resize(static_cast<std::size_t>(width) * height);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[y] = out.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

GrayMask read_gray_mask(const fs::path& path) {
  int w = 0, h = 0;
  const auto px = read_gray_png(path, w, h);
  GrayMask g(w, h);
  for (std::size_t i = 0; i < px.size(); ++i) g.values[i] = px[i] / 255.0;
  return g;
}

BinaryMask read_binary_mask(const fs::path& path) {
  int w = 0, h = 0;
  const auto px = read_gray_png(path, w, h);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < px.size(); ++i) m.bits[i] = px[i] >= 128 ? 1 : 0;
  return m;
}

// ---- image size probe -------------------------------------------------------

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr base;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

void probe_jpeg(const fs::path& path, int& width, int& height) {
  auto f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::Io, "JPEG header unreadable: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  width = static_cast<int>(cinfo.image_width);
  height = static_cast<int>(cinfo.image_height);
  jpeg_destroy_decompress(&cinfo);
}

void probe_png(const fs::path& path, int& width, int& height) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "PNG header unreadable: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void probe_image_size(const fs::path& path, int& width, int& height) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".png") {
    probe_png(path, width, height);
  } else if (ext == ".jpg" || ext == ".jpeg") {
    probe_jpeg(path, width, height);
  } else {
    throw Error(ErrorCode::Io, "unsupported image type: " + path.string());
  }
  if (width < 1 || height < 1) throw Error(ErrorCode::Io, "empty image: " + path.string());
}

// ---- files --------------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw corrupt(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(1) + "\n"); }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

}  // namespace iapf::io
