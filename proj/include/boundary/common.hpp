#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace boundary {

// Input or configuration problem attributable to the caller. The CLI maps
// these to exit code 1.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a, 64-bit. Stable across platforms; used to key per-item permutations
// and per-request seeds.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// splitmix64 finalizer. Turns correlated inputs (counters, hashes) into
// well-distributed seeds for mt19937_64.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

// Uniform double in [0, 1) from a 64-bit draw. Unlike
// std::uniform_real_distribution this is bit-identical everywhere.
inline double uniform01(std::uint64_t draw) {
  return static_cast<double>(draw >> 11) * 0x1.0p-53;
}

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Deterministic in-place Fisher-Yates driven by any callable returning
// uint64_t draws (std::shuffle is not portable across standard libraries).
template <typename T, typename Rng>
void portable_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::string base64_encode(std::string_view bytes);

std::string read_file_bytes(const std::string& path);

// ISO-8601 UTC timestamp, e.g. "2026-08-17T12:00:00Z".
std::string utc_timestamp_now();

}  // namespace boundary
