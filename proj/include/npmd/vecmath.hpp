#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace npmd {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Euclidean distance between two vectors of equal length.
inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Norm threshold below which a vector is treated as zero by normalize_unit.
inline constexpr double kDegenerateNorm = 1e-12;

// Normalizes v to unit length in place. A vector with norm below
// kDegenerateNorm maps to the first canonical basis vector; returns the
// pre-normalization norm (0.0 signals the degenerate branch to callers
// that need the zero-gradient rule).
inline double normalize_unit(Vec& v) {
    const double n = norm2(v);
    if (n < kDegenerateNorm) {
        for (auto& x : v) x = 0.0;
        if (!v.empty()) v[0] = 1.0;
        return 0.0;
    }
    for (auto& x : v) x /= n;
    return n;
}

}  // namespace npmd
