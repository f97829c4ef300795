#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lsf/points.hpp"

namespace lsf {

struct Ball {
    std::vector<double> center;
    double radius = 0.0; ///< exact enclosing radius for `center`
    int iterations = 0;
};

/// Approximate smallest enclosing ball, Badoiu-Clarkson core-set iteration:
/// repeatedly step the center toward the farthest point with step 1/(k+1),
/// keeping the best center seen. The returned radius is the exact max
/// distance to the returned center, so enclosure always holds; only
/// optimality is approximate.
inline Ball smallest_enclosing_ball(const PointSet& ps, const std::vector<std::uint32_t>& subset,
                                    int max_iters = 20000, double rel_stop = 1e-7) {
    if (subset.empty()) throw std::invalid_argument("smallest_enclosing_ball: empty subset");
    std::size_t d = ps.d;
    std::vector<double> c(d, 0.0);
    for (auto idx : subset)
        for (std::size_t j = 0; j < d; ++j) c[j] += ps.row(idx)[j];
    for (std::size_t j = 0; j < d; ++j) c[j] /= double(subset.size());

    auto farthest = [&](const std::vector<double>& ctr, double& out_d2) {
        std::uint32_t best = subset[0];
        out_d2 = -1.0;
        for (auto idx : subset) {
            const float* p = ps.row(idx);
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double diff = double(p[j]) - ctr[j];
                s += diff * diff;
            }
            if (s > out_d2) {
                out_d2 = s;
                best = idx;
            }
        }
        return best;
    };

    Ball out;
    out.center = c;
    double best_r2;
    farthest(c, best_r2);
    out.radius = std::sqrt(best_r2);

    int since_improve = 0;
    for (int k = 1; k <= max_iters; ++k) {
        double d2;
        std::uint32_t f = farthest(c, d2);
        double r = std::sqrt(d2);
        if (r < out.radius * (1.0 - rel_stop)) {
            out.radius = r;
            out.center = c;
            since_improve = 0;
        } else if (++since_improve > 200) {
            out.iterations = k;
            return out;
        }
        double step = 1.0 / double(k + 1);
        const float* p = ps.row(f);
        for (std::size_t j = 0; j < d; ++j) c[j] += step * (double(p[j]) - c[j]);
        out.iterations = k;
    }
    return out;
}

} // namespace lsf
