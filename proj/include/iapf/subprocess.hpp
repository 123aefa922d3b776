#pragma once

// Wire-protocol client over a child process's standard input/output.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "iapf/backend.hpp"

namespace iapf {

class SubprocessBackend : public Backend {
 public:
  // `command` runs under /bin/sh -c. The process is started on first use and
  // restarted after a transport, protocol or timeout failure.
  explicit SubprocessBackend(std::string command,
                             std::chrono::milliseconds timeout = std::chrono::seconds(300));
  ~SubprocessBackend() override;

  SubprocessBackend(const SubprocessBackend&) = delete;
  SubprocessBackend& operator=(const SubprocessBackend&) = delete;

  TagBundle generate_tags(const ImageRef& image, const TagRequest& request) const override;
  BoxSet detect_boxes(const ImageRef& image, const std::string& tag) const override;
  Heatmap compute_heatmap(const ImageRef& image, const std::string& tag) const override;
  BinaryMask segment(const ImageRef& image, const PromptTriplet& triplet) const override;

  // One request/response exchange. Returns the result object or throws
  // TransportError, ProtocolError, RemoteError or Timeout.
  nlohmann::json call(const std::string& method, nlohmann::json params) const;

  std::uint64_t last_request_id() const;

 private:
  struct Child;

  std::string command_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  mutable std::unique_ptr<Child> child_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace iapf
