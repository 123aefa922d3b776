#pragma once

// File-backed backend. Layout per image id under the root:
//   tags.json                {"caption", "runs":[{"prompt","fg_tags","bg_tags"}],
//                             optional "width"/"height"}
//   boxes/<tag>.json         [{"x0","y0","x1","y1","score"}, ...]
//   heatmaps/<tag>.iahm      IAHM heatmap
//   segments/<digest>.rle.json

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "iapf/backend.hpp"

namespace iapf {

class FixtureBackend : public Backend {
 public:
  explicit FixtureBackend(std::filesystem::path root);

  TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const override;
  BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const override;
  Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const override;
  BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const override;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path image_dir(const ImageRef& image) const;

  std::filesystem::path root_;
};

// Forwards to `inner` and writes every answer into a fixture tree that
// FixtureBackend can replay.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(const Backend& inner, std::filesystem::path root);

  TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const override;
  BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const override;
  Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const override;
  BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const override;

 private:
  const Backend& inner_;
  std::filesystem::path root_;
  mutable std::mutex mu_;
};

// Rejects tags that cannot be used as a file name component.
void require_path_safe_tag(const std::string& tag);

// Schema and invariant checks over a whole tree. Returns one line per
// violation; empty means valid.
std::vector<std::string> validate_fixture_tree(const std::filesystem::path& root);

}  // namespace iapf
