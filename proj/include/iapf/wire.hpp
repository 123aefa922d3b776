#pragma once

// Newline-delimited JSON protocol between the pipeline and a model server.
//
//   request  {"id":uint,"method":M,"params":{...}}
//   response {"id":uint,"result":{...}} | {"id":uint,"error":{"code":int,"message":str}}
//
// Methods and payloads:
//   generate_tags   {image_path, prompt, fg_query, bg_query} -> {caption, fg_tags, bg_tags}
//   detect_boxes    {image_path, tag} -> {boxes:[{x0,y0,x1,y1,score}]}
//   compute_heatmap {image_path, tag} -> {h, w, data_b64}   (base64 of the IAHM float body)
//   segment         {image_path, box, fg_points:[[x,y]], bg_points:[[x,y]]} -> RLE mask

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

#include "iapf/backend.hpp"

namespace iapf::wire {

using nlohmann::json;

inline constexpr std::size_t kMaxFrameBytes = std::size_t{512} << 20;

enum RemoteCode : int {
  kUnknownMethod = 1,
  kBadParams = 2,
  kModelFailure = 3,
  kResourceExhausted = 4,
};

json make_request(std::uint64_t id, std::string_view method, json params);

json tags_params(const std::string& image_path, const TagRequest& request);
json tag_params(const std::string& image_path, const std::string& tag);
json segment_params(const std::string& image_path, const PromptTriplet& triplet);

json tags_result(const TagBundle& b);
json boxes_result(const BoxSet& s);
json heatmap_result(const Heatmap& h);
json mask_result(const BinaryMask& m);

// Client-side decoding; any schema violation is a ProtocolError.
TagBundle decode_tags(const json& result);
BoxSet decode_boxes(const json& result, const std::string& tag);
Heatmap decode_heatmap(const json& result);
BinaryMask decode_mask(const json& result);

// Decoded response frame: either a result object or a RemoteError thrown.
// Throws ProtocolError when the frame is malformed or the id differs.
json parse_response(std::string_view line, std::uint64_t expected_id);

// Answers request lines with a backend. Images are addressed by path; the
// image id is the file stem and the size is read from the file header.
class Server {
 public:
  explicit Server(const Backend& backend);

  std::string handle(std::string_view line);

 private:
  ImageRef image_for(const json& params);

  const Backend& backend_;
  std::mutex mu_;
  std::map<std::string, ImageRef> images_;
};

// Reads requests until EOF; returns 0.
int serve(const Backend& backend, std::istream& in, std::ostream& out);

}  // namespace iapf::wire
