#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "iapf/core.hpp"

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "iapf") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int below(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); }

inline iapf::BinaryMask mask_from(int w, int h, std::initializer_list<int> bits) {
  iapf::BinaryMask m(w, h);
  std::size_t i = 0;
  for (int b : bits) m.bits[i++] = static_cast<std::uint8_t>(b);
  return m;
}

inline iapf::BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  iapf::BinaryMask m(w, h);
  for (auto& b : m.bits) b = unit(rng) < density ? 1 : 0;
  return m;
}

}  // namespace testing_support
