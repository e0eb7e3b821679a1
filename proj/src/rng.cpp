#include "semloc/rng.hpp"

namespace semloc {

std::uint64_t Rng::below(std::uint64_t n) {
    // Reject the low partial bucket so every residue is equally likely.
    const std::uint64_t threshold = (0 - n) % n;
    while (true) {
        const std::uint64_t r = engine_();
        if (r >= threshold) return r % n;
    }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace semloc
