#pragma once

// Model-backend contract: tagger, open-vocabulary detector, heatmap
// extractor and promptable segmenter behind one interface.

#include <string>
#include <vector>

#include "iapf/core.hpp"
#include "iapf/sfmbp.hpp"

namespace iapf {

struct TagRequest {
  std::string prompt;
  std::string fg_query_template = "Name of the {prompt} in one word.";
  std::string bg_query_template = "Name of the environment of the {prompt} in one word.";

  std::string fg_query() const;
  std::string bg_query() const;
  void validate() const;
};

struct TagBundle {
  std::string caption;
  std::vector<std::string> fg_tags;
  std::vector<std::string> bg_tags;
};

// Trims tags, drops a trailing period, dedups bg tags in first-occurrence
// order. Throws `kind` when a tag is empty or not a single token, or when
// there is no foreground tag.
TagBundle normalize_tags(TagBundle bundle, ErrorCode kind);

// Order-preserving dedup (set semantics over background tags).
std::vector<std::string> unique_tags(const std::vector<std::string>& tags);

struct PromptTriplet {
  BBox box;
  std::vector<sfmbp::Point> fg_points;
  std::vector<sfmbp::Point> bg_points;
};

// Stable key for a triplet: box corners rounded to 2 decimals plus the
// sorted point coordinate lists, hashed with SHA-256 (first 16 hex chars).
std::string triplet_canonical_string(const PromptTriplet& t);
std::string triplet_digest(const PromptTriplet& t);

// Implementations must be safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const = 0;
  virtual BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const = 0;
  virtual Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const = 0;
  virtual BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const = 0;
};

}  // namespace iapf
