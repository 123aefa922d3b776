#pragma once

// Instance mask generation for one foreground tag: detector boxes,
// per-box point prompts, one segmenter call per box, stacked in box order.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iapf/backend.hpp"
#include "iapf/core.hpp"
#include "iapf/sfmbp.hpp"

namespace iapf {

struct GeneratorConfig {
  sfmbp::SamplingConfig sampling;
  std::optional<double> nms_iou = 0.9;
  double min_box_score = 0.0;
  bool fallback_to_full_image = true;
  // Off = never ask the detector; every tag gets the whole-image box.
  bool use_detector = true;

  void validate() const;
};

BoxSet prepare_boxes(const BoxSet& raw, const ImageRef& image, const GeneratorConfig& cfg);

std::vector<PromptTriplet> build_triplets(const ImageRef& image, const BoxSet& boxes,
                                          const Heatmap& h_fg,
                                          std::span<const Heatmap> h_bgs,
                                          const GeneratorConfig& cfg);

struct GeneratedInstances {
  BoxSet boxes;  // prepared boxes, same order as the stack
  InstanceMaskStack stack;
};

// Heatmaps supplied by the caller (the pipeline computes each unique tag once).
GeneratedInstances generate_instance_masks(const ImageRef& image, const std::string& fg_tag,
                                           const Heatmap& h_fg,
                                           std::span<const Heatmap> h_bgs,
                                           const Backend& backend,
                                           const GeneratorConfig& cfg);

// Convenience form that fetches the foreground and background heatmaps itself.
InstanceMaskStack generate_instance_masks(const ImageRef& image, const std::string& fg_tag,
                                          const std::vector<std::string>& bg_tags,
                                          const Backend& backend, const GeneratorConfig& cfg);

// Runs `fn` and rewraps any library error as a BackendError naming `call`.
template <typename Fn>
auto backend_call(const std::string& call, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Backend) throw;
    throw Error(ErrorCode::Backend, e.code(), call + ": " + e.what());
  }
}

}  // namespace iapf
