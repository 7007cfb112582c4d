#pragma once

#include <cstdint>
#include <random>

namespace bpre {

/// Independent random stream for one replica. The engine state is a pure
/// function of (seed, replica_id, purpose), so replicas can run in any order
/// or on any thread and still reproduce bit-for-bit.
class ReplicaStream {
 public:
  using result_type = std::mt19937_64::result_type;

  ReplicaStream(std::uint64_t seed, std::uint64_t replica_id, std::uint32_t purpose = 0)
      : engine_(stream_key(seed, replica_id, purpose)) {}

  /// SplitMix64 finalizer; a bijection on 64-bit words.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replica_id, std::uint32_t purpose) {
    return mix(mix(mix(seed) ^ replica_id) ^ purpose);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bpre
