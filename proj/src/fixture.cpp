#include "iapf/fixture.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "iapf/io.hpp"

namespace iapf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error corrupt(const fs::path& p, const std::string& why) {
  return Error(ErrorCode::FixtureCorrupt, p.string() + ": " + why);
}

json load(const fs::path& p) {
  if (!fs::exists(p)) throw Error(ErrorCode::FixtureMissing, p.string());
  try {
    return io::read_json(p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FixtureCorrupt) throw corrupt(p, e.what());
    throw;
  } catch (const json::exception& e) {
    throw corrupt(p, e.what());
  }
}

std::vector<std::string> string_list(const json& j, const char* key, const fs::path& p) {
  if (!j.contains(key) || !j.at(key).is_array()) throw corrupt(p, std::string(key) + " must be an array");
  std::vector<std::string> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) throw corrupt(p, std::string(key) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<BBox> boxes_from_json(const json& j, const fs::path& p) {
  if (!j.is_array()) throw corrupt(p, "boxes file must hold an array");
  std::vector<BBox> out;
  for (const auto& b : j) {
    try {
      out.push_back(io::box_from_json(b));
    } catch (const Error& e) {
      throw corrupt(p, e.what());
    }
    if (!(out.back().x0 < out.back().x1 && out.back().y0 < out.back().y1)) {
      throw corrupt(p, "box needs x0 < x1 and y0 < y1");
    }
  }
  return out;
}

json boxes_to_json(const std::vector<BBox>& boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back(io::box_to_json(b));
  return arr;
}

void check_dims(const ImageRef& image, int w, int h, const fs::path& p) {
  if (w != image.width || h != image.height) {
    throw corrupt(p, "size " + std::to_string(w) + "x" + std::to_string(h) + " differs from image " +
                         std::to_string(image.width) + "x" + std::to_string(image.height));
  }
}

}  // namespace

void require_path_safe_tag(const std::string& tag) {
  if (tag.empty() || tag == "." || tag == ".." || tag.find('/') != std::string::npos ||
      tag.find('\\') != std::string::npos || tag.find('\0') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "tag '" + tag + "' is not usable as a file name");
  }
}

// ---- FixtureBackend -------------------------------------------------------------

FixtureBackend::FixtureBackend(fs::path root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) throw Error(ErrorCode::FixtureMissing, root_.string());
}

fs::path FixtureBackend::image_dir(const ImageRef& image) const {
  require_path_safe_tag(image.id);
  return root_ / image.id;
}

TagBundle FixtureBackend::generate_tags(const ImageRef& image, const TagRequest& request) const {
  request.validate();
  const fs::path p = image_dir(image) / "tags.json";
  const json j = load(p);
  if (!j.is_object() || !j.contains("runs") || !j.at("runs").is_array()) {
    throw corrupt(p, "expected an object with a runs array");
  }
  for (const auto& run : j.at("runs")) {
    if (!run.is_object() || !run.contains("prompt") || !run.at("prompt").is_string()) {
      throw corrupt(p, "run without a prompt");
    }
    if (run.at("prompt").get<std::string>() != request.prompt) continue;
    TagBundle b;
    const json& cap = run.contains("caption") ? run.at("caption") : j.value("caption", json(""));
    if (!cap.is_string()) throw corrupt(p, "caption must be a string");
    b.caption = cap.get<std::string>();
    b.fg_tags = string_list(run, "fg_tags", p);
    b.bg_tags = string_list(run, "bg_tags", p);
    try {
      return normalize_tags(std::move(b), ErrorCode::FixtureCorrupt);
    } catch (const Error& e) {
      throw corrupt(p, e.what());
    }
  }
  throw Error(ErrorCode::FixtureMissing, p.string() + ": no run for prompt '" + request.prompt + "'");
}

BoxSet FixtureBackend::detect_boxes(const ImageRef& image, const std::string& tag) const {
  require_path_safe_tag(tag);
  const fs::path p = image_dir(image) / "boxes" / (tag + ".json");
  return BoxSet{tag, boxes_from_json(load(p), p)};
}

Heatmap FixtureBackend::compute_heatmap(const ImageRef& image, const std::string& tag) const {
  require_path_safe_tag(tag);
  const fs::path p = image_dir(image) / "heatmaps" / (tag + ".iahm");
  if (!fs::exists(p)) throw Error(ErrorCode::FixtureMissing, p.string());
  Heatmap h;
  try {
    h = io::decode_iahm(io::read_file(p));
  } catch (const Error& e) {
    throw corrupt(p, e.what());
  }
  check_dims(image, h.width, h.height, p);
  return h;
}

BinaryMask FixtureBackend::segment(const ImageRef& image, const PromptTriplet& triplet) const {
  const fs::path p = image_dir(image) / "segments" / (triplet_digest(triplet) + ".rle.json");
  const json j = load(p);
  BinaryMask m;
  try {
    m = rle_decode(io::rle_from_json(j));
  } catch (const Error& e) {
    throw corrupt(p, e.what());
  }
  check_dims(image, m.width, m.height, p);
  return m;
}

// ---- RecordingBackend -----------------------------------------------------------

RecordingBackend::RecordingBackend(const Backend& inner, fs::path root)
    : inner_(inner), root_(std::move(root)) {}

TagBundle RecordingBackend::generate_tags(const ImageRef& image, const TagRequest& request) const {
  TagBundle b = normalize_tags(inner_.generate_tags(image, request), ErrorCode::Backend);
  require_path_safe_tag(image.id);
  for (const auto& t : b.fg_tags) require_path_safe_tag(t);
  for (const auto& t : b.bg_tags) require_path_safe_tag(t);

  std::lock_guard lock(mu_);
  const fs::path p = root_ / image.id / "tags.json";
  json j = fs::exists(p) ? io::read_json(p) : json{{"caption", b.caption}, {"runs", json::array()}};
  j["width"] = image.width;
  j["height"] = image.height;
  json run = {{"prompt", request.prompt}, {"caption", b.caption}, {"fg_tags", b.fg_tags},
              {"bg_tags", b.bg_tags}};
  auto& runs = j["runs"];
  auto it = std::find_if(runs.begin(), runs.end(),
                         [&](const json& r) { return r.value("prompt", "") == request.prompt; });
  if (it != runs.end()) {
    *it = std::move(run);
  } else {
    runs.push_back(std::move(run));
  }
  io::write_json(p, j);
  return b;
}

BoxSet RecordingBackend::detect_boxes(const ImageRef& image, const std::string& tag) const {
  BoxSet s = inner_.detect_boxes(image, tag);
  require_path_safe_tag(image.id);
  require_path_safe_tag(tag);
  std::lock_guard lock(mu_);
  io::write_json(root_ / image.id / "boxes" / (tag + ".json"), boxes_to_json(s.boxes));
  return s;
}

Heatmap RecordingBackend::compute_heatmap(const ImageRef& image, const std::string& tag) const {
  Heatmap h = inner_.compute_heatmap(image, tag);
  require_path_safe_tag(image.id);
  require_path_safe_tag(tag);
  std::lock_guard lock(mu_);
  io::write_file(root_ / image.id / "heatmaps" / (tag + ".iahm"), io::encode_iahm(h));
  return h;
}

BinaryMask RecordingBackend::segment(const ImageRef& image, const PromptTriplet& triplet) const {
  BinaryMask m = inner_.segment(image, triplet);
  require_path_safe_tag(image.id);
  std::lock_guard lock(mu_);
  io::write_json(root_ / image.id / "segments" / (triplet_digest(triplet) + ".rle.json"),
                 io::rle_to_json(rle_encode(m)));
  return m;
}

// ---- validation -----------------------------------------------------------------

namespace {

bool is_hex16(const std::string& s) {
  return s.size() == 16 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::string strip_suffix(const std::string& name, const std::string& suffix) {
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return {};
  }
  return name.substr(0, name.size() - suffix.size());
}

void validate_image_dir(const fs::path& dir, std::vector<std::string>& errors) {
  auto fail = [&](const fs::path& p, const std::string& why) {
    errors.push_back(p.string() + ": " + why);
  };

  std::set<std::string> fg, bg;
  int width = -1, height = -1;
  const fs::path tags_path = dir / "tags.json";
  if (!fs::exists(tags_path)) {
    fail(tags_path, "missing");
  } else {
    try {
      const json j = io::read_json(tags_path);
      if (!j.is_object()) throw corrupt(tags_path, "not an object");
      if (!j.contains("caption") || !j.at("caption").is_string()) fail(tags_path, "caption must be a string");
      if (j.contains("width") || j.contains("height")) {
        if (!j.value("width", json()).is_number_unsigned() || !j.value("height", json()).is_number_unsigned()) {
          fail(tags_path, "width/height must be non-negative integers");
        } else {
          width = j.at("width").get<int>();
          height = j.at("height").get<int>();
        }
      }
      if (!j.contains("runs") || !j.at("runs").is_array() || j.at("runs").empty()) {
        fail(tags_path, "runs must be a nonempty array");
      } else {
        std::set<std::string> prompts;
        for (const auto& run : j.at("runs")) {
          if (!run.is_object() || !run.contains("prompt") || !run.at("prompt").is_string()) {
            fail(tags_path, "run without a string prompt");
            continue;
          }
          if (!prompts.insert(run.at("prompt").get<std::string>()).second) {
            fail(tags_path, "duplicate prompt '" + run.at("prompt").get<std::string>() + "'");
          }
          TagBundle b{"", string_list(run, "fg_tags", tags_path), string_list(run, "bg_tags", tags_path)};
          const TagBundle n = normalize_tags(b, ErrorCode::FixtureCorrupt);
          if (n.fg_tags != b.fg_tags || n.bg_tags != b.bg_tags) {
            fail(tags_path, "tags are not normalized (trimmed, single token, deduplicated)");
          }
          fg.insert(n.fg_tags.begin(), n.fg_tags.end());
          bg.insert(n.bg_tags.begin(), n.bg_tags.end());
        }
      }
    } catch (const Error& e) {
      fail(tags_path, e.what());
    }
  }

  for (const auto& tag : fg) {
    const fs::path p = dir / "boxes" / (tag + ".json");
    if (!fs::exists(p)) {
      fail(p, "missing boxes for foreground tag");
      continue;
    }
    try {
      boxes_from_json(io::read_json(p), p);
    } catch (const Error& e) {
      fail(p, e.what());
    }
  }

  std::set<std::string> heat_tags = fg;
  heat_tags.insert(bg.begin(), bg.end());
  for (const auto& tag : heat_tags) {
    const fs::path p = dir / "heatmaps" / (tag + ".iahm");
    if (!fs::exists(p)) {
      fail(p, "missing heatmap");
      continue;
    }
    try {
      const Heatmap h = io::decode_iahm(io::read_file(p));
      if (width < 0) {
        width = h.width;
        height = h.height;
      } else if (h.width != width || h.height != height) {
        fail(p, "heatmap size differs from the image size");
      }
    } catch (const Error& e) {
      fail(p, e.what());
    }
  }

  const fs::path seg_dir = dir / "segments";
  if (fs::is_directory(seg_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(seg_dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      const std::string key = strip_suffix(p.filename().string(), ".rle.json");
      if (!is_hex16(key)) {
        fail(p, "segment file name is not a 16-hex-digit digest");
        continue;
      }
      try {
        const BinaryMask m = rle_decode(io::rle_from_json(io::read_json(p)));
        if (width >= 0 && (m.width != width || m.height != height)) {
          fail(p, "mask size differs from the image size");
        }
      } catch (const Error& e) {
        fail(p, e.what());
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_fixture_tree(const fs::path& root) {
  std::vector<std::string> errors;
  if (!fs::is_directory(root)) {
    errors.push_back(root.string() + ": not a directory");
    return errors;
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) errors.push_back(root.string() + ": no image directories");
  for (const auto& d : dirs) validate_image_dir(d, errors);
  return errors;
}

}  // namespace iapf
