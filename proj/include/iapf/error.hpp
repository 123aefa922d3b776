#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iapf {

enum class ErrorCode {
  CountsMismatch,
  DimensionMismatch,
  DegenerateBox,
  InvalidArgument,
  NoBoxes,
  EmptyStack,
  EmptyCandidates,
  Backend,
  FixtureMissing,
  FixtureCorrupt,
  UnknownTag,
  Transport,
  Protocol,
  Remote,
  Timeout,
  MissingPrediction,
  MissingGroundTruth,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::CountsMismatch: return "CountsMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoBoxes: return "NoBoxes";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::Backend: return "BackendError";
    case ErrorCode::FixtureMissing: return "FixtureMissing";
    case ErrorCode::FixtureCorrupt: return "FixtureCorrupt";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::Transport: return "TransportError";
    case ErrorCode::Protocol: return "ProtocolError";
    case ErrorCode::Remote: return "RemoteError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

// Single exception type for the library. `cause()` keeps the original code
// when a lower-level failure is wrapped (e.g. a FixtureMissing inside a
// BackendError). `remote_code()` is only meaningful for RemoteError.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        cause_(code) {}

  Error(ErrorCode code, ErrorCode cause, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        cause_(cause) {}

  static Error remote(int remote_code, const std::string& message) {
    Error e(ErrorCode::Remote,
            "code " + std::to_string(remote_code) + ": " + message);
    e.remote_code_ = remote_code;
    return e;
  }

  ErrorCode code() const noexcept { return code_; }
  ErrorCode cause() const noexcept { return cause_; }
  int remote_code() const noexcept { return remote_code_; }

 private:
  ErrorCode code_;
  ErrorCode cause_;
  int remote_code_ = 0;
};

}  // namespace iapf
