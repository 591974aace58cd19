#pragma once

// Counter-based random streams (Philox4x32-10).
//
// Every stream is addressed by (seed, stream_id); draw k of a stream is a pure
// function of (seed, stream_id, k). Work split across threads therefore sees
// the same numbers no matter how it is scheduled.

#include <array>
#include <cstdint>

namespace paoxi {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr int kRounds = 10;

  static Counter block(Counter ctr, Key key) noexcept;
};

/// Well-known stream ids so that independent subsystems never share draws.
enum class StreamDomain : std::uint32_t {
  kPhoton = 1,
  kPhantom = 2,
  kNoise = 3,
  kSplit = 4,
  kGeneric = 5,
};

class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;
  CounterStream(std::uint64_t seed, StreamDomain domain, std::uint64_t stream_id) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, n); n > 0. Rejection-sampled, unbiased.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
  double normal() noexcept;

  std::uint64_t blocks_used() const noexcept { return block_index_; }

 private:
  void refill() noexcept;

  Philox4x32::Key key_{};
  std::uint64_t stream_id_ = 0;
  std::uint64_t block_index_ = 0;
  Philox4x32::Counter buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Mixes a domain tag into a stream id (top 8 bits carry the domain).
constexpr std::uint64_t domain_stream(StreamDomain domain, std::uint64_t id) noexcept {
  return (static_cast<std::uint64_t>(domain) << 56) ^ id;
}

}  // namespace paoxi
