#pragma once

#include <cstdint>
#include <random>

namespace crsn {

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent streams carried by every simulated path.
enum class Stream : std::uint64_t { kPlant = 0, kChannel = 1, kScheduler = 2, kAux = 3 };

/// Explicit random source. Uniforms take the top 53 bits of a 64-bit
/// Mersenne twister draw; normals come from Box-Muller, so sequences are
/// identical across standard libraries.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  /// Sub-seed for (path, stream), derived from the root seed by a counter split.
  static std::uint64_t derive_seed(std::uint64_t root, std::uint64_t path, Stream stream);
  static RandomSource for_path(std::uint64_t root, std::uint64_t path, Stream stream) {
    return RandomSource(derive_seed(root, path, stream));
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace crsn
