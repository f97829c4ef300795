#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "lsf/parallel.hpp"
#include "lsf/points.hpp"
#include "lsf/rng.hpp"

namespace lsf {

// Worst-case-to-sphere reductions: Johnson-Lindenstrauss projection, the
// Hamming-to-sphere scaling, and the randomly-shifted-grid lift that turns an
// arbitrary Euclidean dataset into per-cube spherical instances.

enum class JlMode { Gaussian, Identity };

/// A retained random projection; apply the same map to queries later.
struct JlMap {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    JlMode mode = JlMode::Gaussian;
    std::vector<float> matrix; // out_dim x in_dim, scale folded in

    void apply(const float* in, float* out) const {
        if (mode == JlMode::Identity) {
            for (std::size_t j = 0; j < out_dim; ++j) out[j] = in[j];
            return;
        }
        for (std::size_t i = 0; i < out_dim; ++i)
            out[i] = static_cast<float>(dot(matrix.data() + i * in_dim, in, in_dim));
    }
};

inline JlMap make_jl_map(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed,
                         JlMode mode = JlMode::Gaussian) {
    if (out_dim < 8 && mode == JlMode::Gaussian)
        throw std::domain_error("jl_project: target_dim must be >= 8");
    JlMap m;
    m.in_dim = in_dim;
    m.out_dim = out_dim;
    m.mode = mode;
    if (mode == JlMode::Identity) {
        if (in_dim != out_dim)
            throw std::domain_error("jl_project: identity mode requires target_dim == dim");
        return m;
    }
    m.matrix.resize(out_dim * in_dim);
    double scale = 1.0 / std::sqrt(double(out_dim));
    parallel_for(out_dim, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            RandomStream rs(mix_key(seed, stream::jl, i));
            for (std::size_t j = 0; j < in_dim; ++j)
                m.matrix[i * in_dim + j] = static_cast<float>(rs.next_normal() * scale);
        }
    });
    return m;
}

inline PointSet jl_apply(const JlMap& m, const PointSet& ps) {
    if (ps.d != m.in_dim) throw std::invalid_argument("jl_apply: dimension mismatch");
    PointSet out(ps.n, m.out_dim);
    parallel_for(ps.n, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) m.apply(ps.row(i), out.row(i));
    });
    return out;
}

/// Random Gaussian projection scaled by 1/sqrt(target_dim); the map is
/// returned so the caller can transform queries identically.
inline std::pair<PointSet, JlMap> jl_project(const PointSet& ps, std::size_t target_dim,
                                             std::uint64_t seed, JlMode mode = JlMode::Gaussian) {
    JlMap m = make_jl_map(ps.d, target_dim, seed, mode);
    return {jl_apply(m, ps), std::move(m)};
}

/// +/-1 vectors scaled by 1/sqrt(d): unit norms, |x-y|^2 = 4 Ham(x,y)/d.
inline PointSet hamming_to_sphere(const BitPointSet& bits) {
    PointSet out(bits.n, bits.d);
    double s = 1.0 / std::sqrt(double(bits.d));
    for (std::size_t i = 0; i < bits.n; ++i)
        for (std::size_t j = 0; j < bits.d; ++j)
            out.row(i)[j] = static_cast<float>(bits.bit(i, j) ? s : -s);
    return out;
}

/// Same map for float input; entries must be exactly +/-1.
inline PointSet hamming_to_sphere(const PointSet& pm) {
    PointSet out(pm.n, pm.d);
    double s = 1.0 / std::sqrt(double(pm.d));
    for (std::size_t i = 0; i < pm.n; ++i)
        for (std::size_t j = 0; j < pm.d; ++j) {
            float v = pm.row(i)[j];
            if (v != 1.0f && v != -1.0f)
                throw std::domain_error("hamming_to_sphere: entry not in {-1,+1}");
            out.row(i)[j] = static_cast<float>(v > 0 ? s : -s);
        }
    return out;
}

/// The randomly-shifted-grid lift: cubes of side 10 sqrt(d), each cube's
/// points translated to their centroid and snapped onto a sphere of radius R
/// in d+1 dimensions. A near pair at distance 1 is split across cubes with
/// probability at most 1/10.
struct GridLift {
    double side = 0.0;
    double R = 0.0;
    std::size_t d = 0; ///< input dimension; lifted points have d+1 coords
    std::vector<double> shift;

    struct Cube {
        std::vector<std::int64_t> id;
        std::vector<double> translation; ///< centroid of the cube's points
        PointSet lifted;                 ///< n_cube x (d+1), norms == R
        std::vector<std::uint32_t> orig; ///< original dataset indices
        double max_local_norm = 0.0;     ///< max |x - translation| in the cube
    };
    std::vector<Cube> cubes;
    std::map<std::vector<std::int64_t>, std::size_t> index;

    /// Additive distance distortion bound actually incurred: for two points of
    /// one cube, | |lift(x)-lift(y)| - |x-y| | <= max_local_norm^2 / R.
    double distortion_bound() const {
        double m = 0.0;
        for (const auto& c : cubes) m = std::max(m, c.max_local_norm);
        return m * m / R;
    }

    std::vector<std::int64_t> cube_of(const float* x) const {
        std::vector<std::int64_t> id(d);
        for (std::size_t j = 0; j < d; ++j)
            id[j] = std::int64_t(std::floor((double(x[j]) + shift[j]) / side));
        return id;
    }

    void lift_into(const Cube& cube, const float* x, float* out) const {
        std::vector<double> y(d);
        double nn = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            y[j] = double(x[j]) - cube.translation[j];
            nn += y[j] * y[j];
        }
        double scale = R / std::sqrt(nn + R * R);
        for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<float>(y[j] * scale);
        out[d] = static_cast<float>(R * scale);
    }

    /// Maps a query to (cube index, lifted coordinates); nullopt when the
    /// query's cube holds no dataset points.
    std::optional<std::pair<std::size_t, std::vector<float>>> lift_query(const float* q) const {
        auto it = index.find(cube_of(q));
        if (it == index.end()) return std::nullopt;
        std::vector<float> out(d + 1);
        lift_into(cubes[it->second], q, out.data());
        return std::make_pair(it->second, std::move(out));
    }
};

/// r is assumed rescaled to 1 by the caller. R = 0 picks the default
/// d^2 * max(1, ln ln n); with desk-scale d the proof's value is often more
/// useful replaced by an explicit knob, and the incurred distortion is always
/// reported via distortion_bound().
inline GridLift grid_lift(const PointSet& ps, std::uint64_t seed, double R = 0.0) {
    GridLift gl;
    gl.d = ps.d;
    gl.side = 10.0 * std::sqrt(double(ps.d));
    if (R <= 0.0) {
        double lnln = ps.n > 2 ? std::log(std::log(double(ps.n))) : 1.0;
        R = double(ps.d) * double(ps.d) * std::max(1.0, lnln);
    }
    gl.R = R;
    RandomStream rs(mix_key(seed, stream::grid));
    gl.shift.resize(ps.d);
    for (std::size_t j = 0; j < ps.d; ++j) gl.shift[j] = rs.next_double() * gl.side;

    // Bucket points by cube.
    std::map<std::vector<std::int64_t>, std::vector<std::uint32_t>> buckets;
    for (std::size_t i = 0; i < ps.n; ++i)
        buckets[gl.cube_of(ps.row(i))].push_back(std::uint32_t(i));

    for (auto& [id, members] : buckets) {
        GridLift::Cube cube;
        cube.id = id;
        cube.orig = members;
        cube.translation.assign(ps.d, 0.0);
        for (auto idx : members)
            for (std::size_t j = 0; j < ps.d; ++j) cube.translation[j] += double(ps.row(idx)[j]);
        for (std::size_t j = 0; j < ps.d; ++j) cube.translation[j] /= double(members.size());
        cube.lifted = PointSet(members.size(), ps.d + 1);
        for (std::size_t k = 0; k < members.size(); ++k) {
            double nn = 0.0;
            for (std::size_t j = 0; j < ps.d; ++j) {
                double y = double(ps.row(members[k])[j]) - cube.translation[j];
                nn += y * y;
            }
            cube.max_local_norm = std::max(cube.max_local_norm, std::sqrt(nn));
            gl.lift_into(cube, ps.row(members[k]), cube.lifted.row(k));
        }
        gl.index[id] = gl.cubes.size();
        gl.cubes.push_back(std::move(cube));
    }
    return gl;
}

} // namespace lsf
