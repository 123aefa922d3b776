#include "iapf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "iapf/io.hpp"

namespace iapf::synthetic {

using nlohmann::json;

// ---- seeding ---------------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next() % span);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ rotl(b, 17) ^ 0x5851f42d4c957f2dULL;
  splitmix(x);
  return splitmix(x);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---- geometry ---------------------------------------------------------------------

bool Instance::contains(int x, int y) const {
  const double px = x + 0.5, py = y + 0.5;
  if (shape == Shape::Disk) {
    const double dx = px - cx, dy = py - cy;
    return dx * dx + dy * dy <= radius * radius;
  }
  return cx - half_w <= px && px < cx + half_w && cy - half_h <= py && py < cy + half_h;
}

double Instance::extent() const {
  return shape == Shape::Disk ? radius : std::min(half_w, half_h);
}

BinaryMask rasterize(const Instance& inst, int width, int height) {
  BinaryMask m(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (inst.contains(x, y)) m.set(x, y);
    }
  }
  return m;
}

BBox tight_box(const Instance& inst, int width, int height) {
  auto b = mask_bounds(rasterize(inst, width, height), 1.0);
  if (!b) throw Error(ErrorCode::InvalidArgument, "instance covers no pixel");
  return *b;
}

BinaryMask semantic_mask(const Scene& s) {
  BinaryMask m(s.width, s.height);
  for (const auto& inst : s.instances) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (inst.contains(x, y)) m.set(x, y);
      }
    }
  }
  return m;
}

void Scene::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "scene size must be positive");
  for (const auto& inst : instances) {
    const double ex = inst.shape == Shape::Disk ? inst.radius : inst.half_w;
    const double ey = inst.shape == Shape::Disk ? inst.radius : inst.half_h;
    if (!(ex > 0 && ey > 0) || inst.cx - ex < 0 || inst.cy - ey < 0 || inst.cx + ex > width ||
        inst.cy + ey > height) {
      throw Error(ErrorCode::InvalidArgument, "instance not fully inside scene " + id);
    }
    if (inst.tag.empty()) throw Error(ErrorCode::InvalidArgument, "instance without tag");
  }
  if (distractor < 0) throw Error(ErrorCode::InvalidArgument, "negative distractor level");
}

std::vector<std::string> Scene::fg_tags() const {
  std::vector<std::string> tags;
  for (const auto& inst : instances) tags.push_back(inst.tag);
  tags = unique_tags(tags);
  if (tags.empty()) tags.push_back("object");
  return tags;
}

json scene_to_json(const Scene& s) {
  json inst = json::array();
  for (const auto& i : s.instances) {
    if (i.shape == Shape::Disk) {
      inst.push_back({{"shape", "disk"}, {"cx", i.cx}, {"cy", i.cy}, {"radius", i.radius}, {"tag", i.tag}});
    } else {
      inst.push_back({{"shape", "rect"}, {"cx", i.cx}, {"cy", i.cy}, {"half_w", i.half_w},
                      {"half_h", i.half_h}, {"tag", i.tag}});
    }
  }
  return json{{"id", s.id},           {"width", s.width},   {"height", s.height},
              {"caption", s.caption}, {"bg_tags", s.bg_tags}, {"distractor", s.distractor},
              {"seed", s.seed},       {"instances", inst}};
}

Scene scene_from_json(const json& j) {
  Scene s;
  try {
    s.id = j.at("id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.caption = j.value("caption", std::string{});
    s.bg_tags = j.value("bg_tags", std::vector<std::string>{});
    s.distractor = j.value("distractor", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& i : j.at("instances")) {
      Instance inst;
      const auto shape = i.at("shape").get<std::string>();
      inst.cx = i.at("cx").get<double>();
      inst.cy = i.at("cy").get<double>();
      inst.tag = i.at("tag").get<std::string>();
      if (shape == "disk") {
        inst.shape = Shape::Disk;
        inst.radius = i.at("radius").get<double>();
      } else if (shape == "rect" || shape == "rectangle") {
        inst.shape = Shape::Rect;
        inst.half_w = i.at("half_w").get<double>();
        inst.half_h = i.at("half_h").get<double>();
      } else {
        throw Error(ErrorCode::FixtureCorrupt, "unknown shape '" + shape + "'");
      }
      s.instances.push_back(std::move(inst));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FixtureCorrupt, std::string("scene: ") + e.what());
  }
  s.validate();
  return s;
}

Scene load_scene(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::FixtureMissing, path.string());
  }
  return scene_from_json(io::read_json(path));
}

// ---- scene generation ----------------------------------------------------------

namespace {

const std::vector<std::string> kFgPool = {"frog", "lizard", "moth", "crab", "owl", "fish"};
const std::vector<std::string> kBgPool = {"sand", "bark", "leaves", "rock", "grass", "water"};

bool boxes_clear(const BBox& a, const BBox& b, double gap) {
  return a.x1 + gap <= b.x0 || b.x1 + gap <= a.x0 || a.y1 + gap <= b.y0 || b.y1 + gap <= a.y0;
}

}  // namespace

Scene random_scene(const std::string& id, std::uint64_t seed, int n_instances) {
  Rng rng(mix_seed(seed, hash_string(id)));
  Scene s;
  s.id = id;
  s.seed = seed;
  s.width = rng.uniform_int(128, 192);
  s.height = rng.uniform_int(128, 192);
  const int n = n_instances >= 0 ? n_instances : rng.uniform_int(1, 4);

  std::vector<std::string> fg = {kFgPool[static_cast<std::size_t>(rng.uniform_int(0, 5))]};
  if (rng.uniform() < 0.3) {
    const auto& extra = kFgPool[static_cast<std::size_t>(rng.uniform_int(0, 5))];
    if (extra != fg[0]) fg.push_back(extra);
  }
  const int n_bg = rng.uniform_int(2, 3);
  for (int i = 0; i < n_bg; ++i) {
    s.bg_tags.push_back(kBgPool[static_cast<std::size_t>(rng.uniform_int(0, 5))]);
  }
  s.caption = "a " + fg[0] + " hidden among " + s.bg_tags.front();

  std::vector<BBox> placed;
  for (int k = 0; k < n; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < 2000 && !ok; ++attempt) {
      Instance inst;
      inst.tag = fg[static_cast<std::size_t>(k) % fg.size()];
      inst.shape = rng.uniform() < 0.7 ? Shape::Disk : Shape::Rect;
      double ex, ey;
      if (inst.shape == Shape::Disk) {
        inst.radius = rng.uniform_int(8, 20);
        ex = ey = inst.radius;
      } else {
        inst.half_w = rng.uniform_int(7, 18);
        inst.half_h = rng.uniform_int(7, 18);
        ex = inst.half_w;
        ey = inst.half_h;
      }
      // Centers sit on pixel centers so the heatmap peak is exactly 1.
      inst.cx = rng.uniform_int(static_cast<int>(ex) + 2, s.width - static_cast<int>(ex) - 3) + 0.5;
      inst.cy = rng.uniform_int(static_cast<int>(ey) + 2, s.height - static_cast<int>(ey) - 3) + 0.5;
      const BBox box = tight_box(inst, s.width, s.height);
      if (std::all_of(placed.begin(), placed.end(),
                      [&](const BBox& b) { return boxes_clear(b, box, 4.0); })) {
        placed.push_back(box);
        s.instances.push_back(std::move(inst));
        ok = true;
      }
    }
    if (!ok) {
      throw Error(ErrorCode::InvalidArgument, "could not place instance in scene " + id);
    }
  }
  s.validate();
  return s;
}

std::vector<std::uint8_t> render(const Scene& s) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(s.width) * s.height);
  const BinaryMask fg = semantic_mask(s);
  Rng rng(mix_seed(s.seed, hash_string(s.id + "/pixels")));
  for (std::size_t i = 0; i < px.size(); ++i) {
    const int base = fg.bits[i] ? 118 : 104;
    px[i] = static_cast<std::uint8_t>(base + rng.uniform_int(-24, 24));
  }
  return px;
}

// ---- backend -------------------------------------------------------------------

SyntheticBackend::SyntheticBackend(Scene scene, std::uint64_t run_seed) : run_seed_(run_seed) {
  add_scene(std::move(scene));
}

SyntheticBackend::SyntheticBackend(std::uint64_t run_seed) : run_seed_(run_seed) {}

void SyntheticBackend::add_scene(Scene scene) {
  scene.validate();
  std::unique_lock lock(mu_);
  auto id = scene.id;
  scenes_[id] = std::make_shared<const Scene>(std::move(scene));
}

std::shared_ptr<const Scene> SyntheticBackend::scene_for(const ImageRef& image) const {
  std::string key;
  if (image.pixel_source) {
    auto path = *image.pixel_source;
    key = path.replace_extension(".scene.json").string();
  }
  {
    std::shared_lock lock(mu_);
    if (auto it = scenes_.find(image.id); it != scenes_.end()) return it->second;
    if (auto it = loaded_.find(key); !key.empty() && it != loaded_.end()) return it->second;
  }
  if (key.empty()) {
    throw Error(ErrorCode::FixtureMissing, "no synthetic scene for image " + image.id);
  }
  auto scene = std::make_shared<const Scene>(load_scene(key));
  if (scene->width != image.width || scene->height != image.height) {
    throw Error(ErrorCode::DimensionMismatch, "scene size differs from image " + image.id);
  }
  std::unique_lock lock(mu_);
  return loaded_.emplace(key, std::move(scene)).first->second;
}

TagBundle SyntheticBackend::generate_tags(const ImageRef& image, const TagRequest& request) const {
  request.validate();
  const auto s = scene_for(image);
  return TagBundle{s->caption.empty() ? "a synthetic scene" : s->caption, s->fg_tags(), s->bg_tags};
}

BoxSet SyntheticBackend::detect_boxes(const ImageRef& image, const std::string& tag) const {
  const auto s = scene_for(image);
  const auto fg = s->fg_tags();
  const bool known_fg = std::find(fg.begin(), fg.end(), tag) != fg.end();
  const bool known_bg = std::find(s->bg_tags.begin(), s->bg_tags.end(), tag) != s->bg_tags.end();
  if (!known_fg && !known_bg) throw Error(ErrorCode::UnknownTag, tag);

  BoxSet out{tag, {}};
  for (std::size_t k = 0; k < s->instances.size(); ++k) {
    const Instance& inst = s->instances[k];
    if (inst.tag != tag) continue;
    BBox b = tight_box(inst, s->width, s->height);
    if (s->distractor > 0) {
      Rng rng(mix_seed(mix_seed(s->seed, run_seed_), mix_seed(hash_string(tag), k)));
      const double amp = s->distractor * inst.extent();
      b.x0 += rng.uniform(-amp, amp);
      b.y0 += rng.uniform(-amp, amp);
      b.x1 += rng.uniform(-amp, amp);
      b.y1 += rng.uniform(-amp, amp);
    }
    out.boxes.push_back(b);
  }
  return out;
}

Heatmap SyntheticBackend::compute_heatmap(const ImageRef& image, const std::string& tag) const {
  const auto s = scene_for(image);
  Heatmap h(s->width, s->height, 0.0f);
  const auto fg = s->fg_tags();
  if (std::find(fg.begin(), fg.end(), tag) != fg.end()) {
    for (const auto& inst : s->instances) {
      if (inst.tag != tag) continue;
      const double sigma = inst.extent() / 2.0;
      for (int y = 0; y < s->height; ++y) {
        for (int x = 0; x < s->width; ++x) {
          const double dx = x + 0.5 - inst.cx, dy = y + 0.5 - inst.cy;
          const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          h.at(x, y) = std::max(h.at(x, y), static_cast<float>(std::clamp(v, 0.0, 1.0)));
        }
      }
    }
    return h;
  }
  if (std::find(s->bg_tags.begin(), s->bg_tags.end(), tag) == s->bg_tags.end()) {
    throw Error(ErrorCode::UnknownTag, tag);
  }
  // Background: a few bumps centered away from every instance.
  Rng rng(mix_seed(s->seed, hash_string("bg/" + tag)));
  const double sigma = std::max(2.0, std::min(s->width, s->height) / 8.0);
  for (int b = 0; b < 3; ++b) {
    double bx = 0, by = 0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      bx = rng.uniform_int(0, s->width - 1) + 0.5;
      by = rng.uniform_int(0, s->height - 1) + 0.5;
      const bool clear = std::none_of(s->instances.begin(), s->instances.end(), [&](const Instance& i) {
        const double d = std::hypot(bx - i.cx, by - i.cy);
        return d < 2.0 * i.extent();
      });
      if (clear) break;
    }
    for (int y = 0; y < s->height; ++y) {
      for (int x = 0; x < s->width; ++x) {
        const double dx = x + 0.5 - bx, dy = y + 0.5 - by;
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        h.at(x, y) = std::max(h.at(x, y), static_cast<float>(v));
      }
    }
  }
  return h;
}

BinaryMask SyntheticBackend::segment(const ImageRef& image, const PromptTriplet& triplet) const {
  const auto s = scene_for(image);
  double best = 0.0;
  const Instance* chosen = nullptr;
  for (const auto& inst : s->instances) {
    const double iou = box_iou(triplet.box, tight_box(inst, s->width, s->height));
    if (iou > best) {
      best = iou;
      chosen = &inst;
    }
  }
  if (!chosen) return BinaryMask(s->width, s->height);
  return rasterize(*chosen, s->width, s->height);
}

}  // namespace iapf::synthetic
