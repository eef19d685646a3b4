#pragma once

// Pair scorers. A scorer receives one 7-channel example (old RGB, new RGB,
// mask; values in [0, 1], masked-out pixels already zero) and returns a
// 1-channel tensor of per-pixel "matching" probabilities of the same size.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mapupdate/core.hpp"

namespace mapupdate {

inline constexpr std::uint32_t kExampleChannels = 7;

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual Tensor score(const Tensor& example) = 0;
};

// Packs crops and mask into the 7-channel scorer layout. Single-channel
// imagery is replicated across RGB. Pixels with mask 0 are zeroed.
Tensor make_example_tensor(const RasterImage& crop_old, const RasterImage& crop_new, const RasterImage& mask);

// Per-pixel 1 - mean_c |new_c - old_c| / contrast, clipped to [0, 1].
class MockScorer final : public Scorer {
 public:
  explicit MockScorer(double contrast = 1.0);
  Tensor score(const Tensor& example) override;

 private:
  double contrast_;
};

// Length-prefixed framing: u64 little-endian byte count, then payload.
std::vector<std::uint8_t> frame(std::span<const std::uint8_t> payload);

// Runs an external scorer process. Each request is a framed CTNS example on
// the child's stdin; each response is a framed CTNS 1-channel tensor on its
// stdout. A response payload that is not CTNS is an error message.
class SubprocessScorer final : public Scorer {
 public:
  explicit SubprocessScorer(std::vector<std::string> argv);
  ~SubprocessScorer() override;
  SubprocessScorer(const SubprocessScorer&) = delete;
  SubprocessScorer& operator=(const SubprocessScorer&) = delete;

  Tensor score(const Tensor& example) override;

 private:
  void write_all(std::span<const std::uint8_t> bytes);
  void read_all(std::span<std::uint8_t> bytes);
  void shutdown();

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

// Splits "cmd:prog arg1 arg2" style scorer specs on whitespace.
std::vector<std::string> split_command(const std::string& cmd);

}  // namespace mapupdate
