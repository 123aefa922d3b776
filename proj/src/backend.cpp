#include "iapf/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_set>

#include "iapf/io.hpp"

namespace iapf {

namespace {

constexpr std::string_view kPlaceholder = "{prompt}";

std::string fill(const std::string& tmpl, const std::string& prompt) {
  std::string out = tmpl;
  for (auto pos = out.find(kPlaceholder); pos != std::string::npos;
       pos = out.find(kPlaceholder, pos + prompt.size())) {
    out.replace(pos, kPlaceholder.size(), prompt);
  }
  return out;
}

std::string clean_tag(std::string tag, ErrorCode kind) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!tag.empty() && is_space(tag.back())) tag.pop_back();
  std::size_t start = 0;
  while (start < tag.size() && is_space(tag[start])) ++start;
  tag.erase(0, start);
  if (!tag.empty() && tag.back() == '.') tag.pop_back();
  if (tag.empty()) throw Error(kind, "empty tag");
  if (std::any_of(tag.begin(), tag.end(), is_space)) {
    throw Error(kind, "tag '" + tag + "' is not a single token");
  }
  if (tag == "." || tag == ".." || tag.find('/') != std::string::npos ||
      tag.find('\\') != std::string::npos) {
    throw Error(kind, "tag '" + tag + "' is not usable as a file name");
  }
  return tag;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid "-0.00" vs "0.00" drift.
  if (std::string_view(buf) == "-0.00") return "0.00";
  return buf;
}

std::string points_key(std::vector<sfmbp::Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  std::string out;
  for (const auto& p : pts) {
    if (!out.empty()) out += ';';
    out += std::to_string(p.x) + "," + std::to_string(p.y);
  }
  return out;
}

}  // namespace

std::string TagRequest::fg_query() const { return fill(fg_query_template, prompt); }
std::string TagRequest::bg_query() const { return fill(bg_query_template, prompt); }

void TagRequest::validate() const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "empty task prompt");
  if (fg_query_template.find(kPlaceholder) == std::string::npos ||
      bg_query_template.find(kPlaceholder) == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "query templates need a {prompt} placeholder");
  }
}

std::vector<std::string> unique_tags(const std::vector<std::string>& tags) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& t : tags) {
    if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

TagBundle normalize_tags(TagBundle bundle, ErrorCode kind) {
  for (auto& t : bundle.fg_tags) t = clean_tag(std::move(t), kind);
  for (auto& t : bundle.bg_tags) t = clean_tag(std::move(t), kind);
  bundle.fg_tags = unique_tags(bundle.fg_tags);
  bundle.bg_tags = unique_tags(bundle.bg_tags);
  if (bundle.fg_tags.empty()) throw Error(kind, "no foreground tag");
  return bundle;
}

std::string triplet_canonical_string(const PromptTriplet& t) {
  return "box:" + fmt2(t.box.x0) + "," + fmt2(t.box.y0) + "," + fmt2(t.box.x1) + "," +
         fmt2(t.box.y1) + "|fg:" + points_key(t.fg_points) + "|bg:" + points_key(t.bg_points);
}

std::string triplet_digest(const PromptTriplet& t) {
  return io::sha256_hex(triplet_canonical_string(t)).substr(0, 16);
}

}  // namespace iapf
