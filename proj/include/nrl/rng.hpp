#pragma once

#include <array>
#include <cstdint>

namespace nrl {

// Stream ids used by the experiment harness. Data, init, and evaluation draws
// never share a stream, so changing one seed cannot perturb another draw.
enum class Stream : std::uint64_t {
  kData = 1,
  kInit = 2,
  kEval = 3,
  kVerify = 4,
};

// Philox4x32-10 (Salmon et al., SC'11). The 64-bit seed is the key; the
// 128-bit counter is (stream_id, block index). Uniform doubles take the top
// 53 bits of each 64-bit word; Gaussians come from Box-Muller applied to
// consecutive uniform pairs, cosine branch first.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "philox4x32-10";

  RngStream(std::uint64_t seed, std::uint64_t stream_id);
  RngStream(std::uint64_t seed, Stream stream) : RngStream(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal.
  double normal();

  // One raw Philox block, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                   std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_index_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nrl
