#pragma once

#include <array>
#include <cstdint>

namespace metastab {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// The output is a pure function of (key, counter); no hidden state.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

// Purposes partition the counter space so that, e.g., the initial-condition
// draws of trajectory 17 never overlap its dither draws.
enum class StreamPurpose : std::uint32_t {
  initial = 1,
  dither = 2,
  chain = 3,
  pilot = 4,
  green_kubo = 5,
  histogram = 6,
  spectral_start = 7,
};

// One independent stream per (seed, purpose, index). Copyable; a copy replays
// the same numbers.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index);

  std::uint32_t next_u32();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }
  double exponential(double rate);
  // Uniform integer in [0, bound).
  std::uint32_t below(std::uint32_t bound);

  std::uint64_t blocks_used() const { return block_; }

private:
  void refill();

  PhiloxKey key_;
  std::uint32_t index_lo_;
  std::uint32_t tag_; // purpose in the top byte, index bits 32..55 below it
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
};

} // namespace metastab
