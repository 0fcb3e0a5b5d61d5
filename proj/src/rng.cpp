#include "pbnn/rng.hpp"

#include <sstream>

#include "pbnn/errors.hpp"

namespace pbnn {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  // splitmix64 finalizer over (seed, stream hash)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (fnv1a64(stream) | 1ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void deserialize_rng(const std::string& state, Rng& rng) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ConfigError("corrupt RNG state in checkpoint");
}

}  // namespace pbnn
