#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace lsf {

enum class Space : std::uint8_t { Sphere = 0, Hamming = 1 };

/// Dense row-major float point collection.
struct PointSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> data; // n * d, row-major

    PointSet() = default;
    PointSet(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_, 0.0f) {}

    const float* row(std::size_t i) const { return data.data() + i * d; }
    float* row(std::size_t i) { return data.data() + i * d; }
};

/// Packed +/-1 vectors; bit 1 encodes +1.
struct BitPointSet {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t words_per_row = 0;
    std::vector<std::uint64_t> words;

    BitPointSet() = default;
    BitPointSet(std::size_t n_, std::size_t d_)
        : n(n_), d(d_), words_per_row((d_ + 63) / 64), words(n_ * words_per_row, 0) {}

    const std::uint64_t* row(std::size_t i) const { return words.data() + i * words_per_row; }
    std::uint64_t* row(std::size_t i) { return words.data() + i * words_per_row; }

    bool bit(std::size_t i, std::size_t j) const {
        return (row(i)[j / 64] >> (j % 64)) & 1u;
    }
    void set_bit(std::size_t i, std::size_t j, bool v) {
        if (v) row(i)[j / 64] |= (1ULL << (j % 64));
        else row(i)[j / 64] &= ~(1ULL << (j % 64));
    }

    std::size_t hamming(std::size_t i, std::size_t j) const {
        std::size_t h = 0;
        const std::uint64_t* a = row(i);
        const std::uint64_t* b = row(j);
        for (std::size_t w = 0; w < words_per_row; ++w)
            h += static_cast<std::size_t>(__builtin_popcountll(a[w] ^ b[w]));
        return h;
    }

    /// Expand row i to +/-1 floats.
    void expand(std::size_t i, float* out) const {
        for (std::size_t j = 0; j < d; ++j) out[j] = bit(i, j) ? 1.0f : -1.0f;
    }
};

// Fixed-order dot products: eight independent accumulators, deterministic for
// a given binary and still vectorizable without -ffast-math.
[[gnu::noinline]] inline double dot(const float* a, const float* b, std::size_t d) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
    std::size_t j = 0;
    for (; j + 8 <= d; j += 8) {
        s0 += double(a[j + 0]) * b[j + 0];
        s1 += double(a[j + 1]) * b[j + 1];
        s2 += double(a[j + 2]) * b[j + 2];
        s3 += double(a[j + 3]) * b[j + 3];
        s4 += double(a[j + 4]) * b[j + 4];
        s5 += double(a[j + 5]) * b[j + 5];
        s6 += double(a[j + 6]) * b[j + 6];
        s7 += double(a[j + 7]) * b[j + 7];
    }
    double tail = 0;
    for (; j < d; ++j) tail += double(a[j]) * b[j];
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7)) + tail;
}

[[gnu::noinline]] inline double dist2(const float* a, const float* b, std::size_t d) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t j = 0;
    for (; j + 4 <= d; j += 4) {
        double d0 = double(a[j + 0]) - b[j + 0];
        double d1 = double(a[j + 1]) - b[j + 1];
        double d2 = double(a[j + 2]) - b[j + 2];
        double d3 = double(a[j + 3]) - b[j + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    double tail = 0;
    for (; j < d; ++j) {
        double dd = double(a[j]) - b[j];
        tail += dd * dd;
    }
    return (s0 + s1) + (s2 + s3) + tail;
}

inline double dist(const float* a, const float* b, std::size_t d) {
    return std::sqrt(dist2(a, b, d));
}

inline double norm(const float* a, std::size_t d) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += double(a[j]) * a[j];
    return std::sqrt(s);
}

inline void require_unit_norm(const PointSet& ps, double tol = 1e-6) {
    for (std::size_t i = 0; i < ps.n; ++i) {
        double nn = norm(ps.row(i), ps.d);
        if (std::abs(nn - 1.0) > tol)
            throw std::invalid_argument("point " + std::to_string(i) +
                                        " is not unit-norm (|x| = " + std::to_string(nn) + ")");
    }
}

} // namespace lsf
