#include "iapf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "iapf/fixture.hpp"
#include "iapf/io.hpp"
#include "iapf/metrics.hpp"
#include "iapf/synthetic.hpp"

namespace iapf {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config ---------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (prompts.empty()) throw Error(ErrorCode::InvalidArgument, "at least one prompt is required");
  for (const auto& p : prompts) {
    if (p.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  }
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
  generator.validate();
}

std::vector<std::string> PipelineConfig::run_prompts() const {
  std::vector<std::string> out;
  for (int i = 0; i < repeats; ++i) out.push_back(prompts[static_cast<std::size_t>(i) % prompts.size()]);
  return out;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; })) {
      throw Error(ErrorCode::InvalidArgument, std::string("unknown key '") + k + "' in " + where);
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  reject_unknown(j, {"prompts", "repeats", "generator", "seed"}, "config");
  PipelineConfig cfg;
  read_key(j, "prompts", cfg.prompts);
  read_key(j, "repeats", cfg.repeats);
  read_key(j, "seed", cfg.seed);
  if (j.contains("generator")) {
    const json& g = j.at("generator");
    if (!g.is_object()) throw Error(ErrorCode::InvalidArgument, "generator must be an object");
    reject_unknown(g, {"sampling", "nms_iou", "min_box_score", "fallback_to_full_image", "use_detector"},
                   "generator");
    auto& gc = cfg.generator;
    if (g.contains("nms_iou")) {
      if (g.at("nms_iou").is_null()) {
        gc.nms_iou.reset();
      } else {
        double v = 0;
        read_key(g, "nms_iou", v);
        gc.nms_iou = v;
      }
    }
    read_key(g, "min_box_score", gc.min_box_score);
    read_key(g, "fallback_to_full_image", gc.fallback_to_full_image);
    read_key(g, "use_detector", gc.use_detector);
    if (g.contains("sampling")) {
      const json& s = g.at("sampling");
      if (!s.is_object()) throw Error(ErrorCode::InvalidArgument, "sampling must be an object");
      reject_unknown(s, {"tau", "k_fg", "k_bg", "d_min_frac"}, "sampling");
      read_key(s, "tau", gc.sampling.tau);
      read_key(s, "k_fg", gc.sampling.k_fg);
      read_key(s, "k_bg", gc.sampling.k_bg);
      read_key(s, "d_min_frac", gc.sampling.d_min_frac);
    }
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  const auto& g = cfg.generator;
  return json{{"prompts", cfg.prompts},
              {"repeats", cfg.repeats},
              {"seed", cfg.seed},
              {"generator",
               {{"sampling",
                 {{"tau", g.sampling.tau},
                  {"k_fg", g.sampling.k_fg},
                  {"k_bg", g.sampling.k_bg},
                  {"d_min_frac", g.sampling.d_min_frac}}},
                {"nms_iou", g.nms_iou ? json(*g.nms_iou) : json(nullptr)},
                {"min_box_score", g.min_box_score},
                {"fallback_to_full_image", g.fallback_to_full_image},
                {"use_detector", g.use_detector}}}};
}

void apply_env_overrides(PipelineConfig& cfg) {
  const char* s = std::getenv("IAPF_SEED");
  if (!s || !*s) return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || s[0] == '-') {
    throw Error(ErrorCode::InvalidArgument, std::string("IAPF_SEED is not an unsigned integer: ") + s);
  }
  cfg.seed = v;
}

// ---- single image ---------------------------------------------------------------

namespace {

// Counts and times every capability call.
class MeteredBackend : public Backend {
 public:
  explicit MeteredBackend(const Backend& inner) : inner_(inner) {}

  TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const override {
    return timed("generate_tags", [&] { return inner_.generate_tags(image, request); });
  }
  BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const override {
    return timed("detect_boxes", [&] { return inner_.detect_boxes(image, tag); });
  }
  Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const override {
    return timed("compute_heatmap", [&] { return inner_.compute_heatmap(image, tag); });
  }
  BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const override {
    return timed("segment", [&] { return inner_.segment(image, triplet); });
  }

  mutable std::map<std::string, CallStats> stats;

 private:
  template <typename Fn>
  auto timed(const char* name, Fn&& fn) const -> decltype(fn()) {
    const auto t0 = std::chrono::steady_clock::now();
    auto& s = stats[name];
    ++s.calls;
    struct Stop {
      CallStats& s;
      std::chrono::steady_clock::time_point t0;
      ~Stop() { s.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
    } stop{s, t0};
    return fn();
  }

  const Backend& inner_;
};

std::string strip_code_prefix(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

}  // namespace

RunArtifact run_image(const ImageRef& image, const PipelineConfig& cfg, const Backend& backend) {
  cfg.validate();
  if (image.width < 1 || image.height < 1) {
    throw Error(ErrorCode::InvalidArgument, "image " + image.id + " has no size");
  }
  MeteredBackend metered(backend);
  RunArtifact art;
  art.image = image;

  // Heatmaps depend only on (image, tag), so one computation serves every run.
  std::map<std::string, Heatmap> heatmaps;
  auto heatmap = [&](const std::string& tag) -> const Heatmap& {
    auto it = heatmaps.find(tag);
    if (it == heatmaps.end()) {
      Heatmap h = backend_call("compute_heatmap('" + tag + "')",
                               [&] { return metered.compute_heatmap(image, tag); });
      require_same_dims(h.width, h.height, image.width, image.height, "heatmap");
      it = heatmaps.emplace(tag, std::move(h)).first;
    }
    return it->second;
  };

  const auto prompts = cfg.run_prompts();
  std::vector<simv::RunPair> pairs;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    RunRecord rec;
    rec.prompt = prompts[i];
    try {
      TagRequest req;
      req.prompt = rec.prompt;
      rec.tags = backend_call("generate_tags", [&] {
        return normalize_tags(metered.generate_tags(image, req), ErrorCode::Backend);
      });
      std::vector<Heatmap> h_bgs;
      for (const auto& tag : rec.tags.bg_tags) h_bgs.push_back(heatmap(tag));
      for (const auto& fg : rec.tags.fg_tags) {
        const Heatmap& h_fg = heatmap(fg);
        auto gen = generate_instance_masks(image, fg, h_fg, h_bgs, metered, cfg.generator);
        rec.boxes.push_back(std::move(gen.boxes));
        for (auto& m : gen.stack.masks) rec.stack.masks.push_back(std::move(m));
        for (auto& b : gen.stack.boxes) rec.stack.boxes.push_back(b);
      }
      rec.semantic = simv::collapse_semantic(rec.stack);
    } catch (const Error& e) {
      throw Error(e.code(), e.cause(),
                  "run " + std::to_string(i) + " ('" + rec.prompt + "'): " + strip_code_prefix(e));
    }
    pairs.push_back({simv::SemanticMask{rec.semantic, static_cast<int>(i)}, rec.stack});
    art.runs.push_back(std::move(rec));
  }

  auto [chosen, vote] = simv::select_final(pairs);
  art.vote = std::move(vote);
  art.final_mask = std::move(chosen.first.mask);
  art.final_stack = std::move(chosen.second);
  art.calls = metered.stats;
  return art;
}

json artifact_to_json(const RunArtifact& a, bool include_timings) {
  json runs = json::array();
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    const RunRecord& r = a.runs[i];
    json boxes = json::object();
    for (const auto& set : r.boxes) {
      json arr = json::array();
      for (const auto& b : set.boxes) arr.push_back(io::box_to_json(b));
      boxes[set.tag] = std::move(arr);
    }
    runs.push_back({{"index", i},
                    {"prompt", r.prompt},
                    {"caption", r.tags.caption},
                    {"fg_tags", r.tags.fg_tags},
                    {"bg_tags", r.tags.bg_tags},
                    {"boxes", std::move(boxes)},
                    {"instance_count", r.stack.masks.size()},
                    {"semantic_area", r.semantic.count()}});
  }
  json final_boxes = json::array();
  for (const auto& b : a.final_stack.boxes) final_boxes.push_back(io::box_to_json(b));
  json calls = json::object();
  json timings = json::object();
  for (const auto& [name, s] : a.calls) {
    calls[name] = s.calls;
    timings[name] = s.seconds;
  }
  json out = {{"image", {{"id", a.image.id}, {"width", a.image.width}, {"height", a.image.height}}},
              {"runs", std::move(runs)},
              {"vote", {{"selected_index", a.vote.selected_index}, {"distances", a.vote.distances}}},
              {"final_boxes", std::move(final_boxes)},
              {"final_area", a.final_mask.count()},
              {"calls", std::move(calls)}};
  if (include_timings) out["timings_s"] = std::move(timings);
  return out;
}

// ---- datasets -------------------------------------------------------------------

std::vector<ImageRef> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::map<std::string, fs::path> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
    const std::string id = e.path().stem().string();
    if (!found.emplace(id, e.path()).second) {
      throw Error(ErrorCode::InvalidArgument, "two images share the id '" + id + "'");
    }
  }
  std::vector<ImageRef> out;
  for (const auto& [id, path] : found) {
    ImageRef ref;
    ref.id = id;
    ref.pixel_source = path;
    io::probe_image_size(path, ref.width, ref.height);
    out.push_back(std::move(ref));
  }
  return out;
}

std::string DatasetSummary::line() const {
  return std::to_string(ok) + " ok, " + std::to_string(failed) + " failed";
}

DatasetSummary run_dataset(const fs::path& image_dir, const PipelineConfig& cfg, const Backend& backend,
                           const fs::path& out_dir, const RunOptions& opts) {
  cfg.validate();
  const auto images = list_images(image_dir);
  if (images.empty()) throw Error(ErrorCode::InvalidArgument, "no images in " + image_dir.string());
  fs::create_directories(out_dir);

  std::vector<std::string> errors(images.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < images.size(); k = next++) {
      const ImageRef& img = images[k];
      try {
        const RunArtifact a = run_image(img, cfg, backend);
        metrics::InstancePayload inst;
        inst.width = img.width;
        inst.height = img.height;
        inst.masks = a.final_stack.masks;
        for (const auto& b : a.final_stack.boxes) inst.scores.push_back(b.score);
        io::write_mask_png(out_dir / (img.id + ".png"), a.final_mask);
        metrics::write_instances(out_dir / (img.id + ".inst.json"), inst);
        io::write_json(out_dir / (img.id + ".artifact.json"), artifact_to_json(a, opts.timings));
      } catch (const std::exception& e) {
        errors[k] = e.what();
        if (errors[k].empty()) errors[k] = "unknown error";
      }
    }
  };
  const int jobs = std::clamp(opts.jobs, 1, static_cast<int>(images.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  DatasetSummary s;
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (errors[k].empty()) {
      ++s.ok;
    } else {
      ++s.failed;
      s.failures.emplace_back(images[k].id, errors[k]);
    }
  }
  return s;
}

std::vector<std::string> make_synthetic_dataset(int n_images, std::uint64_t seed, const fs::path& out_dir) {
  if (n_images < 1) throw Error(ErrorCode::InvalidArgument, "n_images must be >= 1");
  const fs::path images = out_dir / "images";
  const fs::path gt = out_dir / "gt";
  const fs::path fixtures = out_dir / "fixtures";
  fs::create_directories(images);
  fs::create_directories(gt);
  fs::create_directories(fixtures);

  synthetic::SyntheticBackend oracle(seed);
  RecordingBackend recorder(oracle, fixtures);
  PipelineConfig cfg;
  cfg.seed = seed;

  std::vector<std::string> ids;
  for (int i = 0; i < n_images; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%04d", i);
    const std::string id = buf;
    const synthetic::Scene scene = synthetic::random_scene(id, seed);

    io::write_gray_png(images / (id + ".png"), scene.width, scene.height, synthetic::render(scene));
    io::write_json(images / (id + ".scene.json"), synthetic::scene_to_json(scene));

    io::write_mask_png(gt / (id + ".png"), synthetic::semantic_mask(scene));
    metrics::InstancePayload inst;
    inst.width = scene.width;
    inst.height = scene.height;
    for (const auto& in : scene.instances) {
      inst.masks.push_back(synthetic::rasterize(in, scene.width, scene.height));
      inst.scores.push_back(1.0);
    }
    metrics::write_instances(gt / (id + ".inst.json"), inst);

    oracle.add_scene(scene);
    ImageRef ref{id, scene.width, scene.height, images / (id + ".png")};
    run_image(ref, cfg, recorder);
    ids.push_back(id);
  }
  return ids;
}

}  // namespace iapf
