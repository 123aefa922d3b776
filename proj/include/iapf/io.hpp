#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "iapf/core.hpp"

namespace iapf::io {

namespace fs = std::filesystem;
using nlohmann::json;

// IAHM heatmap container: "IAHM", u32le height, u32le width, then
// height*width float32le values, row-major.
std::string encode_iahm(const Heatmap& h);
Heatmap decode_iahm(std::string_view bytes);

// Just the float payload (no magic, no dims) as carried on the wire.
std::string encode_heatmap_body(const Heatmap& h);
Heatmap decode_heatmap_body(std::string_view bytes, int width, int height);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

json rle_to_json(const RleMask& rle);
RleMask rle_from_json(const json& j);

json box_to_json(const BBox& b);
BBox box_from_json(const json& j);

// 8-bit grayscale PNG. Masks are written as 0/255.
void write_mask_png(const fs::path& path, const BinaryMask& mask);
void write_gray_png(const fs::path& path, int width, int height,
                    std::span<const std::uint8_t> pixels);
// Reads any PNG as 8-bit gray (palette/RGB/alpha/16-bit are converted).
std::vector<std::uint8_t> read_gray_png(const fs::path& path, int& width,
                                        int& height);
GrayMask read_gray_mask(const fs::path& path);
// Ground truth binarized at value >= 128.
BinaryMask read_binary_mask(const fs::path& path);

// Width/height from a PNG or JPEG header.
void probe_image_size(const fs::path& path, int& width, int& height);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);
json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

std::string sha256_hex(std::string_view bytes);

}  // namespace iapf::io
