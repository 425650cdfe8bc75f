#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace erp {

// All seeded shuffling and sampling in the project goes through these
// helpers. The generator is std::mt19937_64, whose output sequence is
// pinned by the C++ standard, and the bounded draw is a plain modulo
// reduction, so orderings reproduce bit-for-bit across platforms.
// (std::shuffle and std::uniform_int_distribution are implementation
// defined and deliberately avoided.)

inline uint64_t bounded_u64(std::mt19937_64& gen, uint64_t n) {
    return gen() % n;  // n is tiny relative to 2^64; bias is negligible
}

template <typename T>
void seeded_shuffle(std::vector<T>& items, uint64_t seed) {
    std::mt19937_64 gen(seed);
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(bounded_u64(gen, i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

// Deterministic sample without replacement: shuffle a copy, keep the
// first min(k, size) elements.
template <typename T>
std::vector<T> seeded_sample(const std::vector<T>& items, size_t k,
                             uint64_t seed) {
    std::vector<T> out = items;
    seeded_shuffle(out, seed);
    if (out.size() > k) out.resize(k);
    return out;
}

}  // namespace erp
