#include "iapf/wire.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <new>
#include <ostream>

#include "iapf/io.hpp"

namespace iapf::wire {

namespace {

Error protocol(const std::string& why) { return Error(ErrorCode::Protocol, why); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw protocol(std::string("missing field '") + key + "'");
  return obj.at(key);
}

std::vector<std::string> strings(const json& obj, const char* key) {
  const json& arr = field(obj, key);
  if (!arr.is_array()) throw protocol(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw protocol(std::string("'") + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

json points_json(const std::vector<sfmbp::Point>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

// Rethrows any library error as ProtocolError (payload failed validation).
template <typename Fn>
auto as_protocol(const char* what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Protocol) throw;
    throw Error(ErrorCode::Protocol, e.code(), std::string(what) + ": " + e.what());
  } catch (const json::exception& e) {
    throw protocol(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json make_request(std::uint64_t id, std::string_view method, json params) {
  return json{{"id", id}, {"method", method}, {"params", std::move(params)}};
}

json tags_params(const std::string& image_path, const TagRequest& request) {
  return json{{"image_path", image_path},
              {"prompt", request.prompt},
              {"fg_query", request.fg_query()},
              {"bg_query", request.bg_query()}};
}

json tag_params(const std::string& image_path, const std::string& tag) {
  return json{{"image_path", image_path}, {"tag", tag}};
}

json segment_params(const std::string& image_path, const PromptTriplet& t) {
  return json{{"image_path", image_path},
              {"box", io::box_to_json(t.box)},
              {"fg_points", points_json(t.fg_points)},
              {"bg_points", points_json(t.bg_points)}};
}

json tags_result(const TagBundle& b) {
  return json{{"caption", b.caption}, {"fg_tags", b.fg_tags}, {"bg_tags", b.bg_tags}};
}

json boxes_result(const BoxSet& s) {
  json arr = json::array();
  for (const auto& b : s.boxes) arr.push_back(io::box_to_json(b));
  return json{{"boxes", arr}};
}

json heatmap_result(const Heatmap& h) {
  return json{{"h", h.height}, {"w", h.width}, {"data_b64", io::base64_encode(io::encode_heatmap_body(h))}};
}

json mask_result(const BinaryMask& m) { return io::rle_to_json(rle_encode(m)); }

TagBundle decode_tags(const json& r) {
  TagBundle b;
  const json& cap = field(r, "caption");
  if (!cap.is_string()) throw protocol("'caption' must be a string");
  b.caption = cap.get<std::string>();
  b.fg_tags = strings(r, "fg_tags");
  b.bg_tags = strings(r, "bg_tags");
  return as_protocol("tags", [&] { return normalize_tags(std::move(b), ErrorCode::Protocol); });
}

BoxSet decode_boxes(const json& r, const std::string& tag) {
  const json& arr = field(r, "boxes");
  if (!arr.is_array()) throw protocol("'boxes' must be an array");
  BoxSet s{tag, {}};
  for (const auto& b : arr) s.boxes.push_back(as_protocol("box", [&] { return io::box_from_json(b); }));
  return s;
}

Heatmap decode_heatmap(const json& r) {
  const json& h = field(r, "h");
  const json& w = field(r, "w");
  const json& data = field(r, "data_b64");
  if (!h.is_number_unsigned() || !w.is_number_unsigned() || !data.is_string()) {
    throw protocol("heatmap needs unsigned h, w and a string data_b64");
  }
  const auto hh = h.get<std::uint64_t>(), ww = w.get<std::uint64_t>();
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<int>::max());
  if (hh > kMax || ww > kMax || (hh != 0 && ww > kMaxFrameBytes / 4 / hh)) {
    throw protocol("heatmap dimensions out of range");
  }
  return as_protocol("heatmap", [&] {
    return io::decode_heatmap_body(io::base64_decode(data.get<std::string>()), static_cast<int>(ww),
                                   static_cast<int>(hh));
  });
}

BinaryMask decode_mask(const json& r) {
  return as_protocol("mask", [&] { return rle_decode(io::rle_from_json(r)); });
}

json parse_response(std::string_view line, std::uint64_t expected_id) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw protocol(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw protocol("response is not an object");
  if (!j.contains("id") || !j.at("id").is_number_unsigned()) throw protocol("response without unsigned id");
  const auto id = j.at("id").get<std::uint64_t>();
  if (id != expected_id) {
    throw protocol("response id " + std::to_string(id) + " does not match request " +
                   std::to_string(expected_id));
  }
  const bool has_result = j.contains("result");
  const bool has_error = j.contains("error");
  if (has_result == has_error) throw protocol("response needs exactly one of result and error");
  if (has_error) {
    const json& e = j.at("error");
    if (!e.is_object() || !e.contains("code") || !e.at("code").is_number_integer() ||
        !e.contains("message") || !e.at("message").is_string()) {
      throw protocol("error object needs an integer code and a string message");
    }
    const auto code = e.at("code").get<std::int64_t>();
    if (code < std::numeric_limits<int>::min() || code > std::numeric_limits<int>::max()) {
      throw protocol("error code out of range");
    }
    throw Error::remote(static_cast<int>(code), e.at("message").get<std::string>());
  }
  if (!j.at("result").is_object()) throw protocol("result is not an object");
  return std::move(j.at("result"));
}

// ---- server ---------------------------------------------------------------------

namespace {

struct BadParams : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const json& param(const json& params, const char* key) {
  if (!params.contains(key)) throw BadParams(std::string("missing param '") + key + "'");
  return params.at(key);
}

std::string string_param(const json& params, const char* key) {
  const json& v = param(params, key);
  if (!v.is_string()) throw BadParams(std::string("param '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<sfmbp::Point> points_param(const json& params, const char* key) {
  const json& arr = param(params, key);
  if (!arr.is_array()) throw BadParams(std::string("param '") + key + "' must be an array");
  std::vector<sfmbp::Point> out;
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw BadParams(std::string("param '") + key + "' entries must be [x,y] integer pairs");
    }
    out.push_back({p[0].get<int>(), p[1].get<int>(), 1.0});
  }
  return out;
}

std::string error_line(const json& id, int code, const std::string& message) {
  return json{{"id", id}, {"error", {{"code", code}, {"message", message}}}}.dump();
}

}  // namespace

Server::Server(const Backend& backend) : backend_(backend) {}

ImageRef Server::image_for(const json& params) {
  const std::string path = string_param(params, "image_path");
  std::lock_guard lock(mu_);
  if (auto it = images_.find(path); it != images_.end()) return it->second;
  ImageRef ref;
  ref.id = std::filesystem::path(path).stem().string();
  ref.pixel_source = path;
  try {
    io::probe_image_size(path, ref.width, ref.height);
  } catch (const Error& e) {
    throw BadParams(std::string("unreadable image: ") + e.what());
  }
  images_.emplace(path, ref);
  return ref;
}

std::string Server::handle(std::string_view line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return error_line(nullptr, kBadParams, "request is not JSON");
  }
  if (!req.is_object() || !req.contains("id") || !req.at("id").is_number_unsigned()) {
    return error_line(nullptr, kBadParams, "request needs an unsigned id");
  }
  const json id = req.at("id");
  if (!req.contains("method") || !req.at("method").is_string()) {
    return error_line(id, kBadParams, "request needs a string method");
  }
  const std::string method = req.at("method").get<std::string>();
  const json params = req.value("params", json::object());
  if (!params.is_object()) return error_line(id, kBadParams, "params must be an object");

  try {
    json result;
    if (method == "generate_tags") {
      const ImageRef img = image_for(params);
      TagRequest tr;
      tr.prompt = string_param(params, "prompt");
      result = tags_result(backend_.generate_tags(img, tr));
    } else if (method == "detect_boxes") {
      const ImageRef img = image_for(params);
      result = boxes_result(backend_.detect_boxes(img, string_param(params, "tag")));
    } else if (method == "compute_heatmap") {
      const ImageRef img = image_for(params);
      result = heatmap_result(backend_.compute_heatmap(img, string_param(params, "tag")));
    } else if (method == "segment") {
      const ImageRef img = image_for(params);
      PromptTriplet t;
      try {
        t.box = io::box_from_json(param(params, "box"));
      } catch (const Error& e) {
        throw BadParams(e.what());
      }
      t.fg_points = points_param(params, "fg_points");
      t.bg_points = points_param(params, "bg_points");
      result = mask_result(backend_.segment(img, t));
    } else {
      return error_line(id, kUnknownMethod, "unknown method '" + method + "'");
    }
    return json{{"id", id}, {"result", std::move(result)}}.dump();
  } catch (const BadParams& e) {
    return error_line(id, kBadParams, e.what());
  } catch (const std::bad_alloc&) {
    return error_line(id, kResourceExhausted, "out of memory");
  } catch (const Error& e) {
    const bool caller_fault = e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::UnknownTag;
    return error_line(id, caller_fault ? kBadParams : kModelFailure, e.what());
  } catch (const std::exception& e) {
    return error_line(id, kModelFailure, e.what());
  }
}

int serve(const Backend& backend, std::istream& in, std::ostream& out) {
  Server server(backend);
  std::string line;
  while (std::getline(in, line)) {
    out << server.handle(line) << '\n';
    out.flush();
  }
  return 0;
}

}  // namespace iapf::wire
