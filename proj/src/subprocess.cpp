#include "iapf/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "iapf/wire.hpp"

extern char** environ;

namespace iapf {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

Error transport(const std::string& why) { return Error(ErrorCode::Transport, why); }

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  if (left.count() <= 0) return 0;
  return left.count() > 60000 ? 60000 : static_cast<int>(left.count());
}

}  // namespace

struct SubprocessBackend::Child {
  pid_t pid = -1;
  int fd = -1;
  std::string buffer;
  bool graceful = false;

  explicit Child(const std::string& command) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
      throw transport(errno_text("socketpair"));
    }
    posix_spawn_file_actions_t fa;
    posix_spawnattr_t attr;
    posix_spawn_file_actions_init(&fa);
    posix_spawnattr_init(&attr);
    posix_spawn_file_actions_adddup2(&fa, sv[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, sv[1], STDOUT_FILENO);
    posix_spawnattr_setpgroup(&attr, 0);
    sigset_t def;
    sigemptyset(&def);
    sigaddset(&def, SIGPIPE);
    posix_spawnattr_setsigdefault(&attr, &def);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGDEF);

    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    const int rc = ::posix_spawn(&pid, "/bin/sh", &fa, &attr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&fa);
    posix_spawnattr_destroy(&attr);
    ::close(sv[1]);
    if (rc != 0) {
      ::close(sv[0]);
      throw transport(std::string("cannot start '") + command + "': " + std::strerror(rc));
    }
    fd = sv[0];
  }

  ~Child() {
    if (fd >= 0) ::close(fd);
    if (pid > 0) {
      if (graceful) {
        // Closing the stream asks the server to exit; give it a moment.
        int status = 0;
        for (int i = 0; i < 100; ++i) {
          if (::waitpid(pid, &status, WNOHANG) == pid) return;
          ::usleep(10000);
        }
      }
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      int status = 0;
      while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
      }
    }
  }

  void send_all(const std::string& data, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < data.size()) {
      pollfd p{fd, POLLOUT, 0};
      const int r = ::poll(&p, 1, remaining_ms(deadline));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw transport(errno_text("poll"));
      }
      if (r == 0) {
        if (Clock::now() >= deadline) throw Error(ErrorCode::Timeout, "sending request");
        continue;
      }
      const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL | MSG_DONTWAIT);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        throw transport(errno_text("send"));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    std::size_t scanned = 0;
    char chunk[65536];
    for (;;) {
      const auto nl = buffer.find('\n', scanned);
      if (nl != std::string::npos) {
        std::string line = buffer.substr(0, nl);
        buffer.erase(0, nl + 1);
        return line;
      }
      scanned = buffer.size();
      if (buffer.size() > wire::kMaxFrameBytes) {
        throw Error(ErrorCode::Protocol, "response frame exceeds size limit");
      }
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, remaining_ms(deadline));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw transport(errno_text("poll"));
      }
      if (r == 0) {
        if (Clock::now() >= deadline) throw Error(ErrorCode::Timeout, "waiting for response");
        continue;
      }
      const ssize_t n = ::recv(fd, chunk, sizeof chunk, MSG_DONTWAIT);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        throw transport(errno_text("recv"));
      }
      if (n == 0) {
        if (!buffer.empty()) throw Error(ErrorCode::Protocol, "stream closed inside a response frame");
        throw transport("model server closed the stream");
      }
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }
};

SubprocessBackend::SubprocessBackend(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  if (command_.empty()) throw Error(ErrorCode::InvalidArgument, "empty subprocess command");
  if (timeout_.count() <= 0) throw Error(ErrorCode::InvalidArgument, "timeout must be positive");
}

SubprocessBackend::~SubprocessBackend() {
  if (child_) child_->graceful = true;
}

std::uint64_t SubprocessBackend::last_request_id() const {
  std::lock_guard lock(mu_);
  return next_id_ - 1;
}

json SubprocessBackend::call(const std::string& method, json params) const {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  const auto deadline = Clock::now() + timeout_;
  try {
    if (!child_) child_ = std::make_unique<Child>(command_);
    child_->send_all(wire::make_request(id, method, std::move(params)).dump() + "\n", deadline);
    const std::string line = child_->read_line(deadline);
    return wire::parse_response(line, id);
  } catch (const Error& e) {
    // After a remote error the stream is still in sync; anything else leaves
    // it in an unknown state.
    if (e.code() != ErrorCode::Remote) child_.reset();
    throw;
  } catch (...) {
    child_.reset();
    throw;
  }
}

namespace {

std::string image_path(const ImageRef& image) {
  if (!image.pixel_source) {
    throw Error(ErrorCode::InvalidArgument, "image " + image.id + " has no file path for the model server");
  }
  return image.pixel_source->string();
}

void check_dims(const ImageRef& image, int w, int h, const char* what) {
  if (w != image.width || h != image.height) {
    throw Error(ErrorCode::Protocol, ErrorCode::DimensionMismatch,
                std::string(what) + " size " + std::to_string(w) + "x" + std::to_string(h) +
                    " differs from image " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
}

}  // namespace

TagBundle SubprocessBackend::generate_tags(const ImageRef& image, const TagRequest& request) const {
  request.validate();
  return wire::decode_tags(call("generate_tags", wire::tags_params(image_path(image), request)));
}

BoxSet SubprocessBackend::detect_boxes(const ImageRef& image, const std::string& tag) const {
  return wire::decode_boxes(call("detect_boxes", wire::tag_params(image_path(image), tag)), tag);
}

Heatmap SubprocessBackend::compute_heatmap(const ImageRef& image, const std::string& tag) const {
  Heatmap h = wire::decode_heatmap(call("compute_heatmap", wire::tag_params(image_path(image), tag)));
  check_dims(image, h.width, h.height, "heatmap");
  return h;
}

BinaryMask SubprocessBackend::segment(const ImageRef& image, const PromptTriplet& triplet) const {
  BinaryMask m = wire::decode_mask(call("segment", wire::segment_params(image_path(image), triplet)));
  check_dims(image, m.width, m.height, "mask");
  return m;
}

}  // namespace iapf
