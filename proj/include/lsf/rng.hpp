#pragma once

#include <cmath>
#include <cstdint>

namespace lsf {

// Counter-based random streams. Every consumer derives its own stream key
// from (master seed, stream tag, index...) so parallel generation and
// generation order never change the output.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 1)));
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_key(mix_key(a, b), c);
}

// Stream tags for the named substreams. Frozen: changing them changes every
// seeded artifact.
namespace stream {
constexpr std::uint64_t points = 0x706f696e74730001ULL;
constexpr std::uint64_t queries = 0x7175657269650002ULL;
constexpr std::uint64_t clusters = 0x636c757374720003ULL;
constexpr std::uint64_t tree = 0x747265650a0a0004ULL;
constexpr std::uint64_t jl = 0x6a6c70726f6a0005ULL;
constexpr std::uint64_t grid = 0x677269640a0a0006ULL;
constexpr std::uint64_t mc = 0x6d6f6e7465630007ULL;
} // namespace stream

/// Deterministic stream of uniforms/normals seeded by a 64-bit key.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t key) : state_(key), spare_valid_(false) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_double_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double next_normal() {
        if (spare_valid_) {
            spare_valid_ = false;
            return spare_;
        }
        double u1 = next_double_pos();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        spare_valid_ = true;
        return r * std::cos(a);
    }

    void fill_normals(float* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(next_normal());
    }

    void fill_normals(double* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = next_normal();
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool spare_valid_;
};

} // namespace lsf
