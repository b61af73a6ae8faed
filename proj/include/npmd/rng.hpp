#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "npmd/vecmath.hpp"

namespace npmd {

// splitmix64 finalizer; used to derive independent child seeds so that
// per-scene / per-episode streams never alias the parent stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Random unit vector, uniform on the sphere.
inline Vec random_unit_vector(int dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(static_cast<std::size_t>(dim));
    do {
        for (auto& x : v) x = gauss(rng);
    } while (norm2(v) < kDegenerateNorm);
    normalize_unit(v);
    return v;
}

// k indices sampled uniformly without replacement from [0, n), returned in
// ascending order (partial Fisher-Yates, deterministic given the rng state).
inline std::vector<int> sample_without_replacement(int n, int k, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    if (k > n) k = n;
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace npmd
