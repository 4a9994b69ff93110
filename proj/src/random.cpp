#include "crsn/random.hpp"

#include <cmath>
#include <numbers>

namespace crsn {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t RandomSource::derive_seed(std::uint64_t root, std::uint64_t path, Stream stream) {
  const std::uint64_t counter = path * 4 + static_cast<std::uint64_t>(stream);
  return splitmix64(splitmix64(root) ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - u lies in (0, 1], keeping the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

}  // namespace crsn
