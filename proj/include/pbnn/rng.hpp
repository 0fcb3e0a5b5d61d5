#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace pbnn {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a over a byte string.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Derives an independent seed for the named sub-stream of `seed`.
///
/// All randomness in the library flows through this so that, for example,
/// the proposal noise of two samplers started with the same top-level seed
/// is identical while their batch draws stay uncorrelated.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

inline Rng make_stream(std::uint64_t seed, std::string_view stream) {
  return Rng(derive_seed(seed, stream));
}

std::string serialize_rng(const Rng& rng);
void deserialize_rng(const std::string& state, Rng& rng);

}  // namespace pbnn
