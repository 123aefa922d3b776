#include "iapf/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace iapf {

void GeneratorConfig::validate() const {
  sampling.validate();
  if (nms_iou && !(*nms_iou > 0.0 && *nms_iou <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "nms_iou must be in (0,1]");
  }
}

BoxSet prepare_boxes(const BoxSet& raw, const ImageRef& image, const GeneratorConfig& cfg) {
  cfg.validate();
  std::vector<BBox> kept;
  for (const BBox& b : raw.boxes) {
    if (!std::isfinite(b.x0) || !std::isfinite(b.y0) || !std::isfinite(b.x1) ||
        !std::isfinite(b.y1) || !std::isfinite(b.score)) {
      continue;
    }
    if (b.score < cfg.min_box_score) continue;
    try {
      kept.push_back(clamp_box(b, image));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateBox) throw;
    }
  }
  sort_boxes(kept);

  BoxSet out{raw.tag, {}};
  for (const BBox& b : kept) {
    bool suppressed = false;
    if (cfg.nms_iou) {
      for (const BBox& k : out.boxes) {
        if (box_iou(b, k) >= *cfg.nms_iou) {
          suppressed = true;
          break;
        }
      }
    }
    if (!suppressed) out.boxes.push_back(b);
  }

  if (out.boxes.empty()) {
    if (!cfg.fallback_to_full_image) {
      throw Error(ErrorCode::NoBoxes, "no usable box for tag '" + raw.tag + "'");
    }
    out.boxes.push_back(full_image_box(image, 0.0));
  }
  return out;
}

std::vector<PromptTriplet> build_triplets(const ImageRef& image, const BoxSet& boxes,
                                          const Heatmap& h_fg,
                                          std::span<const Heatmap> h_bgs,
                                          const GeneratorConfig& cfg) {
  require_same_dims(h_fg.width, h_fg.height, image.width, image.height, "foreground heatmap");
  for (const Heatmap& h : h_bgs) {
    require_same_dims(h.width, h.height, image.width, image.height, "background heatmap");
  }
  std::vector<PromptTriplet> out;
  out.reserve(boxes.boxes.size());
  for (const BBox& box : boxes.boxes) {
    auto prompts = sfmbp::sample_points(h_fg, h_bgs, box, cfg.sampling);
    out.push_back({box, std::move(prompts.fg), std::move(prompts.bg)});
  }
  return out;
}

GeneratedInstances generate_instance_masks(const ImageRef& image, const std::string& fg_tag,
                                           const Heatmap& h_fg,
                                           std::span<const Heatmap> h_bgs,
                                           const Backend& backend,
                                           const GeneratorConfig& cfg) {
  if (fg_tag.empty()) throw Error(ErrorCode::InvalidArgument, "empty foreground tag");

  BoxSet raw{fg_tag, {}};
  if (cfg.use_detector) {
    raw = backend_call("detect_boxes('" + fg_tag + "')",
                       [&] { return backend.detect_boxes(image, fg_tag); });
    raw.tag = fg_tag;
  }
  GeneratedInstances out;
  out.boxes = prepare_boxes(raw, image, cfg);

  const auto triplets = build_triplets(image, out.boxes, h_fg, h_bgs, cfg);
  for (std::size_t n = 0; n < triplets.size(); ++n) {
    if (triplets[n].fg_points.empty()) {
      throw std::logic_error("triplet without a foreground point");
    }
    const std::string call =
        "segment(tag '" + fg_tag + "', box " + std::to_string(n) + ")";
    BinaryMask m = backend_call(call, [&] { return backend.segment(image, triplets[n]); });
    if (m.width != image.width || m.height != image.height) {
      throw Error(ErrorCode::Backend, ErrorCode::DimensionMismatch,
                  call + ": mask size differs from image");
    }
    out.stack.masks.push_back(std::move(m));
    out.stack.boxes.push_back(triplets[n].box);
  }
  return out;
}

InstanceMaskStack generate_instance_masks(const ImageRef& image, const std::string& fg_tag,
                                          const std::vector<std::string>& bg_tags,
                                          const Backend& backend, const GeneratorConfig& cfg) {
  const Heatmap h_fg = backend_call("compute_heatmap('" + fg_tag + "')",
                                    [&] { return backend.compute_heatmap(image, fg_tag); });
  std::vector<Heatmap> h_bgs;
  for (const auto& tag : unique_tags(bg_tags)) {
    h_bgs.push_back(backend_call("compute_heatmap('" + tag + "')",
                                 [&] { return backend.compute_heatmap(image, tag); }));
  }
  return generate_instance_masks(image, fg_tag, h_fg, h_bgs, backend, cfg).stack;
}

}  // namespace iapf
