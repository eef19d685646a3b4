#include "mapupdate/scorer.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mapupdate/io.hpp"

extern char** environ;

namespace mapupdate {

Tensor make_example_tensor(const RasterImage& crop_old, const RasterImage& crop_new, const RasterImage& mask) {
  const std::uint32_t h = mask.height();
  const std::uint32_t w = mask.width();
  if (crop_old.height() != h || crop_old.width() != w || crop_new.height() != h || crop_new.width() != w) {
    throw std::invalid_argument("example rasters must share dimensions");
  }
  if (mask.channels() != 1) throw std::invalid_argument("mask must have one channel");
  Tensor t(h, w, kExampleChannels, 1);
  auto rgb = [](const RasterImage& img, std::uint32_t y, std::uint32_t x, std::uint32_t c) {
    return img.channels() >= 3 ? img.at(y, x, c) : img.at(y, x, 0);
  };
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      if (mask.at(y, x) == 0) continue;
      for (std::uint32_t c = 0; c < 3; ++c) {
        t.at(y, x, c) = static_cast<float>(rgb(crop_old, y, x, c) / 255.0);
        t.at(y, x, 3 + c) = static_cast<float>(rgb(crop_new, y, x, c) / 255.0);
      }
      t.at(y, x, 6) = 1.0f;
    }
  }
  return t;
}

MockScorer::MockScorer(double contrast) : contrast_(contrast) {
  if (!(contrast > 0.0)) throw std::invalid_argument("mock scorer contrast must be positive");
}

Tensor MockScorer::score(const Tensor& example) {
  if (example.channels() != kExampleChannels) throw std::invalid_argument("scorer input must have 7 channels");
  Tensor out(example.height(), example.width(), 1, example.scale_factor());
  for (std::uint32_t y = 0; y < example.height(); ++y) {
    for (std::uint32_t x = 0; x < example.width(); ++x) {
      double diff = 0.0;
      for (std::uint32_t c = 0; c < 3; ++c) diff += std::fabs(example.at(y, x, 3 + c) - example.at(y, x, c));
      diff /= 3.0 * contrast_;
      out.at(y, x, 0) = static_cast<float>(1.0 - std::min(1.0, diff));
    }
  }
  return out;
}

std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + payload.size());
  const std::uint64_t n = payload.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>((n >> (8 * b)) & 0xFFu));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream ss(cmd);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

SubprocessScorer::SubprocessScorer(std::vector<std::string> argv) {
  if (argv.empty()) throw std::invalid_argument("scorer command is empty");
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw std::runtime_error("pipe failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw std::runtime_error("pipe failed");
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::vector<char*> args;
  for (std::string& a : argv) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    throw std::runtime_error("cannot start scorer '" + argv[0] + "': " + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

SubprocessScorer::~SubprocessScorer() { shutdown(); }

void SubprocessScorer::shutdown() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

void SubprocessScorer::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = write(to_child_, bytes.data() + done, bytes.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw std::runtime_error("scorer process closed its input");
    done += static_cast<std::size_t>(n);
  }
}

void SubprocessScorer::read_all(std::span<std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = read(from_child_, bytes.data() + done, bytes.size() - done);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw std::runtime_error("scorer process ended before responding");
    done += static_cast<std::size_t>(n);
  }
}

Tensor SubprocessScorer::score(const Tensor& example) {
  if (pid_ < 0) throw std::runtime_error("scorer process is not running");
  write_all(frame(io::encode_ctns(example)));
  std::uint8_t len_bytes[8];
  read_all(len_bytes);
  std::uint64_t n = 0;
  for (int b = 0; b < 8; ++b) n |= static_cast<std::uint64_t>(len_bytes[b]) << (8 * b);
  if (n > (1ULL << 34)) throw std::runtime_error("scorer response frame too large");
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(n));
  read_all(payload);
  if (payload.size() < 4 || std::memcmp(payload.data(), "CTNS", 4) != 0) {
    throw std::runtime_error("scorer error: " + std::string(payload.begin(), payload.end()));
  }
  Tensor out = io::decode_ctns(payload);
  if (out.channels() != 1 || out.height() != example.height() || out.width() != example.width()) {
    throw std::runtime_error("scorer response has the wrong shape");
  }
  return out;
}

}  // namespace mapupdate
