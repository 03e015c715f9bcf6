#ifndef M3GM_RANDOM_HPP_
#define M3GM_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace m3gm {

using Rng = std::mt19937_64;

inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a named stage derived from the root seed, so rerunning one stage
/// alone reproduces the same stream it had inside the full pipeline.
inline std::uint64_t stage_seed(std::uint64_t root, std::string_view stage) {
    return splitmix64(root ^ fnv1a(stage));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform integer in [0, n) without relying on the library distribution,
// whose algorithm is implementation defined.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace m3gm

#endif  // M3GM_RANDOM_HPP_
