#pragma once

#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "lsf/filter_tree.hpp" // detail::write_/read_ helpers
#include "lsf/instance.hpp"
#include "lsf/points.hpp"

namespace lsf {

// Dataset file format: binary, little-endian.
//   magic "LSFD" (u32) | version (u32) | space tag (u32) | n (u64) | d (u64)
//   sphere:  n*d row-major f32
//   hamming: n rows of ceil(d/64) u64 words, bit 1 = +1
// A human-readable `<file>.meta` sidecar carries seeds and generation
// parameters as key=value lines.

constexpr std::uint32_t kDatasetMagic = 0x4c534644; // "LSFD"
constexpr std::uint32_t kDatasetVersion = 1;

inline void save_points(const std::string& path, const PointSet& ps) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write " + path);
    detail::write_u32(f.get(), kDatasetMagic);
    detail::write_u32(f.get(), kDatasetVersion);
    detail::write_u32(f.get(), std::uint32_t(Space::Sphere));
    detail::write_u64(f.get(), ps.n);
    detail::write_u64(f.get(), ps.d);
    std::fwrite(ps.data.data(), 4, ps.data.size(), f.get());
}

inline void save_points(const std::string& path, const BitPointSet& ps) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("cannot write " + path);
    detail::write_u32(f.get(), kDatasetMagic);
    detail::write_u32(f.get(), kDatasetVersion);
    detail::write_u32(f.get(), std::uint32_t(Space::Hamming));
    detail::write_u64(f.get(), ps.n);
    detail::write_u64(f.get(), ps.d);
    std::fwrite(ps.words.data(), 8, ps.words.size(), f.get());
}

inline Space peek_space(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot read " + path);
    if (detail::read_u32(f.get()) != kDatasetMagic)
        throw std::runtime_error(path + ": not a dataset file");
    if (detail::read_u32(f.get()) != kDatasetVersion)
        throw std::runtime_error(path + ": unsupported dataset version");
    return Space(detail::read_u32(f.get()));
}

inline PointSet load_points(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot read " + path);
    if (detail::read_u32(f.get()) != kDatasetMagic)
        throw std::runtime_error(path + ": not a dataset file");
    if (detail::read_u32(f.get()) != kDatasetVersion)
        throw std::runtime_error(path + ": unsupported dataset version");
    if (Space(detail::read_u32(f.get())) != Space::Sphere)
        throw std::runtime_error(path + ": expected a float dataset, found hamming");
    PointSet ps;
    ps.n = detail::read_u64(f.get());
    ps.d = detail::read_u64(f.get());
    ps.data.resize(ps.n * ps.d);
    if (!ps.data.empty() && std::fread(ps.data.data(), 4, ps.data.size(), f.get()) != ps.data.size())
        throw std::runtime_error(path + ": truncated dataset");
    return ps;
}

inline BitPointSet load_bit_points(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("cannot read " + path);
    if (detail::read_u32(f.get()) != kDatasetMagic)
        throw std::runtime_error(path + ": not a dataset file");
    if (detail::read_u32(f.get()) != kDatasetVersion)
        throw std::runtime_error(path + ": unsupported dataset version");
    if (Space(detail::read_u32(f.get())) != Space::Hamming)
        throw std::runtime_error(path + ": expected a hamming dataset");
    BitPointSet ps;
    ps.n = detail::read_u64(f.get());
    ps.d = detail::read_u64(f.get());
    ps.words_per_row = (ps.d + 63) / 64;
    ps.words.resize(ps.n * ps.words_per_row);
    if (!ps.words.empty() &&
        std::fread(ps.words.data(), 8, ps.words.size(), f.get()) != ps.words.size())
        throw std::runtime_error(path + ": truncated dataset");
    return ps;
}

/// Ground-truth file: plain text, key=value header then one `q,p` line per
/// planted pair.
inline void save_truth(const std::string& path, const InstanceTruth& t) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "w"));
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fprintf(f.get(), "space=%s\n", t.space == Space::Sphere ? "sphere" : "hamming");
    std::fprintf(f.get(), "r=%.17g\n", t.r);
    std::fprintf(f.get(), "cr=%.17g\n", t.cr);
    std::fprintf(f.get(), "seed=%llu\n", static_cast<unsigned long long>(t.seed));
    std::fprintf(f.get(), "slack_measured=%d\n", t.slack_measured ? 1 : 0);
    std::fprintf(f.get(), "slack=%.17g\n", t.slack);
    std::fprintf(f.get(), "pairs=%zu\n", t.planted_pairs.size());
    for (const auto& [q, p] : t.planted_pairs) std::fprintf(f.get(), "%u,%u\n", q, p);
}

inline InstanceTruth load_truth(const std::string& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "r"));
    if (!f) throw std::runtime_error("cannot read " + path);
    InstanceTruth t;
    char line[256];
    std::size_t pairs = 0;
    auto need = [&](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(path + ": malformed truth file (" + what + ")");
    };
    while (std::fgets(line, sizeof line, f.get())) {
        if (std::strncmp(line, "space=", 6) == 0) {
            t.space = std::strncmp(line + 6, "sphere", 6) == 0 ? Space::Sphere : Space::Hamming;
        } else if (std::strncmp(line, "r=", 2) == 0) {
            t.r = std::strtod(line + 2, nullptr);
        } else if (std::strncmp(line, "cr=", 3) == 0) {
            t.cr = std::strtod(line + 3, nullptr);
        } else if (std::strncmp(line, "seed=", 5) == 0) {
            t.seed = std::strtoull(line + 5, nullptr, 10);
        } else if (std::strncmp(line, "slack_measured=", 15) == 0) {
            t.slack_measured = std::atoi(line + 15) != 0;
        } else if (std::strncmp(line, "slack=", 6) == 0) {
            t.slack = std::strtod(line + 6, nullptr);
        } else if (std::strncmp(line, "pairs=", 6) == 0) {
            pairs = std::strtoull(line + 6, nullptr, 10);
            for (std::size_t i = 0; i < pairs; ++i) {
                need(std::fgets(line, sizeof line, f.get()) != nullptr, "missing pair");
                char* comma = std::strchr(line, ',');
                need(comma != nullptr, "bad pair");
                t.planted_pairs.emplace_back(std::uint32_t(std::strtoul(line, nullptr, 10)),
                                             std::uint32_t(std::strtoul(comma + 1, nullptr, 10)));
            }
        }
    }
    need(t.planted_pairs.size() == pairs, "pair count");
    return t;
}

/// key=value sidecar used next to datasets and reports.
inline void save_meta(const std::string& path, const std::map<std::string, std::string>& kv) {
    std::unique_ptr<std::FILE, detail::FileCloser> f(std::fopen(path.c_str(), "w"));
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [k, v] : kv) std::fprintf(f.get(), "%s=%s\n", k.c_str(), v.c_str());
}

} // namespace lsf
