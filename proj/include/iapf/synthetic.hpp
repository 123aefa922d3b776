#pragma once

// Procedural scenes whose detector, heatmap and segmenter answers are exact
// by construction. Used as the desk-scale oracle for the whole pipeline.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "iapf/backend.hpp"

namespace iapf::synthetic {

// mt19937_64 output is fixed by the standard; std distributions are not, so
// the draws are built from raw words.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                        // [0,1)
  double uniform(double lo, double hi);    // [lo,hi)
  int uniform_int(int lo, int hi);         // [lo,hi]

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_string(std::string_view s);

enum class Shape { Disk, Rect };

struct Instance {
  Shape shape = Shape::Disk;
  double cx = 0, cy = 0;
  double radius = 0;            // disk
  double half_w = 0, half_h = 0;  // rectangle
  std::string tag;

  bool contains(int x, int y) const;
  double extent() const;  // radius, or the smaller half-extent
};

struct Scene {
  std::string id;
  int width = 0;
  int height = 0;
  std::string caption;
  std::vector<std::string> bg_tags;  // as the tagger would answer (may repeat)
  std::vector<Instance> instances;
  double distractor = 0.0;  // box jitter as a fraction of instance extent
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<std::string> fg_tags() const;
};

nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);
Scene load_scene(const std::filesystem::path& path);

BinaryMask rasterize(const Instance& inst, int width, int height);
BBox tight_box(const Instance& inst, int width, int height);
BinaryMask semantic_mask(const Scene& s);

// Scene with `n_instances` non-overlapping instances (or 1..4 drawn from the
// seed when negative). Deterministic in (id, seed, n_instances).
Scene random_scene(const std::string& id, std::uint64_t seed, int n_instances = -1);

// Grayscale rendering where instances differ only slightly from the background.
std::vector<std::uint8_t> render(const Scene& s);

class SyntheticBackend : public Backend {
 public:
  // One known scene, matched by image id.
  explicit SyntheticBackend(Scene scene, std::uint64_t run_seed = 0);
  // Scenes loaded on demand from `<image stem>.scene.json` next to each image.
  explicit SyntheticBackend(std::uint64_t run_seed = 0);

  void add_scene(Scene scene);

  TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const override;
  BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const override;
  Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const override;
  BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const override;

 private:
  std::shared_ptr<const Scene> scene_for(const ImageRef& image) const;

  std::uint64_t run_seed_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const Scene>> scenes_;  // registered, by image id
  mutable std::map<std::string, std::shared_ptr<const Scene>> loaded_;  // by scene file path
};

}  // namespace iapf::synthetic
