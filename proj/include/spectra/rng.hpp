#pragma once

// Counter-based random number generation (Philox4x32-10).
//
// Every random quantity in the library is a pure function of
// (seed, stream, counter). Streams partition the key space by purpose so
// that, e.g., edge sampling is order-independent: each unordered pair draws
// from its own substream and the generated graph does not depend on
// traversal order.
//
// Stream layout: stream = (domain << 56) | index, where domain identifies
// the consumer (edge sampling, ratings, noise, ...) and index is the
// entity-local substream (pair index, node id, ...).

#include <array>
#include <cmath>
#include <cstdint>

namespace spectra {

// Philox4x32-10: ten rounds of the multiply-bumpkey network from
// Salmon et al.'s counter-based generator family. Constants are the
// published ones; the output is a bijection of the 128-bit counter under
// the 64-bit key.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  static Block generate(std::uint64_t key, const Block& counter) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    Block x = counter;
    for (int round = 0; round < 10; ++round) {
      x = single_round(x, k0, k1);
      k0 += 0x9E3779B9u;  // golden ratio
      k1 += 0xBB67AE85u;  // sqrt(3) - 1
    }
    return x;
  }

 private:
  static Block single_round(const Block& x, std::uint32_t k0,
                            std::uint32_t k1) {
    std::uint64_t p0 = 0xD2511F53ull * x[0];
    std::uint64_t p1 = 0xCD9E8D57ull * x[2];
    std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
  }
};

// Stream domains. Keeping them in one enum documents the split and avoids
// collisions between modules.
enum class StreamDomain : std::uint64_t {
  kSimilarityEdges = 1,   // index = unordered pair index
  kRatingEntries = 2,     // index = user * F + item
  kSyncNoise = 3,         // index = node id
  kSyncInit = 4,          // index = node id
  kAsyncInit = 5,         // index = node id
  kAsyncNodeClock = 6,    // index = node id
  kAsyncEdgeClock = 7,    // index = edge id
  kAsyncNoise = 8,        // index = node id
  kShuffle = 9,           // index = 0
  kEvaluate = 10,         // index = consumer-defined
  kRecombine = 11,        // index = trial id
  kPowerStart = 12,       // index = deflation slot
  kAgreementHide = 13,    // index = user id
  kBmNoise = 14,          // index = node id
  kVotingSample = 15,     // index = user id
  kSyncStepNoise = 16,    // index = t * n + node
};

inline std::uint64_t make_stream(StreamDomain domain, std::uint64_t index) {
  return (static_cast<std::uint64_t>(domain) << 56) | index;
}

// A stateful view over one (seed, stream) substream. Consecutive draws
// advance a 64-bit counter; the underlying generator is stateless, so a
// Rng can be reconstructed anywhere from (seed, stream, position).
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), counter_(0) {}
  Rng(std::uint64_t seed, StreamDomain domain, std::uint64_t index)
      : Rng(seed, make_stream(domain, index)) {}

  // Raw 64 bits: one Philox block yields two 64-bit words; we use the block
  // at counter/2 and pick the half by parity so sequential draws never
  // waste output.
  std::uint64_t next_u64() {
    std::uint64_t c = counter_++;
    Philox4x32::Block ctr = {static_cast<std::uint32_t>(c >> 1),
                             static_cast<std::uint32_t>((c >> 1) >> 32),
                             static_cast<std::uint32_t>(stream_),
                             static_cast<std::uint32_t>(stream_ >> 32)};
    Philox4x32::Block out = Philox4x32::generate(seed_, ctr);
    if (c & 1) {
      return (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    }
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  }

  // Uniform in [0, 1): top 53 bits of a 64-bit draw.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Exponential with the given rate; log1p keeps precision near u = 0.
  double exponential(double rate) {
    return -std::log1p(-uniform01()) / rate;
  }

  // Standard Gaussian via Box-Muller on consecutive uniform pairs. The
  // second variate of each pair is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard u1 = 0: log(0) would produce inf.
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One-shot uniform draw for pair-indexed sampling: cheaper than carrying an
// Rng object per pair and guarantees order independence by construction.
inline double pair_uniform01(std::uint64_t seed, StreamDomain domain,
                             std::uint64_t index) {
  Philox4x32::Block ctr = {0, 0,
                           static_cast<std::uint32_t>(make_stream(domain, index)),
                           static_cast<std::uint32_t>(make_stream(domain, index) >> 32)};
  Philox4x32::Block out = Philox4x32::generate(seed, ctr);
  std::uint64_t bits =
      (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace spectra
