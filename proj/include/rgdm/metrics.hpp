#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "rgdm/error.hpp"
#include "rgdm/parallel.hpp"
#include "rgdm/point_cloud.hpp"

namespace rgdm {

enum class CloudDistance { cd, emd };

// Affine map with per-axis centering and one shared scale: the tight bounding
// box center goes to 0 and the largest half-extent to exactly 1, so output is
// contained in [-1,1]^dim and aspect ratios survive.
inline PointCloud normalize_bbox(const PointCloud& x) {
    std::vector<double> lo(x.dim, std::numeric_limits<double>::infinity());
    std::vector<double> half(x.dim, 0.0);
    for (int k = 0; k < x.dim; ++k) {
        double mn = x.at(0, k), mx = x.at(0, k);
        for (int i = 1; i < x.n; ++i) {
            mn = std::min(mn, x.at(i, k));
            mx = std::max(mx, x.at(i, k));
        }
        lo[k] = mn;
        half[k] = (mx - mn) / 2.0;
    }
    const double scale = *std::max_element(half.begin(), half.end());
    if (!(scale > 0.0))
        throw MetricPrecondition("normalize_bbox: degenerate cloud (zero extent in every axis)");
    PointCloud out(x.n, x.dim);
    for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < x.dim; ++k)
            out.at(i, k) = ((x.at(i, k) - lo[k]) - half[k]) / scale;
    return out;
}

// Symmetric Chamfer distance: squared nearest-neighbor distances, mean per
// side, sum of the two sides.
inline double chamfer(const PointCloud& x, const PointCloud& y) {
    if (x.dim != y.dim) throw MetricPrecondition("chamfer: dimension mismatch");
    if (x.n < 1 || y.n < 1) throw MetricPrecondition("chamfer: empty cloud");
    auto one_side = [](const PointCloud& a, const PointCloud& b) {
        double total = 0.0;
        for (int i = 0; i < a.n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < b.n; ++j) {
                double d = 0.0;
                for (int k = 0; k < a.dim; ++k) {
                    const double diff = a.at(i, k) - b.at(j, k);
                    d += diff * diff;
                }
                best = std::min(best, d);
            }
            total += best;
        }
        return total / a.n;
    };
    return one_side(x, y) + one_side(y, x);
}

namespace detail {

// Exact minimum-cost assignment on an n x n matrix (Jonker-Volgenant style
// shortest augmenting paths with potentials). Returns col assigned to each row.
inline std::vector<int> min_cost_assignment(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * static_cast<std::size_t>(n) + (j - 1)] -
                                   u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace detail

// Earth-Mover distance between equal-size clouds: mean Euclidean (not squared)
// distance under the exact optimal bijection.
inline double emd(const PointCloud& x, const PointCloud& y) {
    if (x.dim != y.dim) throw MetricPrecondition("emd: dimension mismatch");
    if (x.n != y.n)
        throw MetricPrecondition("emd: size mismatch (" + std::to_string(x.n) + " vs " +
                                 std::to_string(y.n) + ")");
    const int n = x.n;
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double d = 0.0;
            for (int k = 0; k < x.dim; ++k) {
                const double diff = x.at(i, k) - y.at(j, k);
                d += diff * diff;
            }
            cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(d);
        }
    const auto match = detail::min_cost_assignment(cost, n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + match[i]];
    return total / n;
}

inline double cloud_distance(const PointCloud& x, const PointCloud& y, CloudDistance d) {
    return d == CloudDistance::cd ? chamfer(x, y) : emd(x, y);
}

// Dense gen x ref distance matrix, rows = gen. Entries fill independent
// slots, so the result does not depend on the thread count.
inline std::vector<double> pairwise_distances(const CloudSet& gen, const CloudSet& ref,
                                              CloudDistance dist, int threads = 0) {
    if (gen.empty() || ref.empty()) throw MetricPrecondition("pairwise_distances: empty set");
    const int ng = static_cast<int>(gen.size());
    const int nr = static_cast<int>(ref.size());
    std::vector<double> d(static_cast<std::size_t>(ng) * nr);
    parallel_for(ng * nr, threads, [&](int idx) {
        const int i = idx / nr, j = idx % nr;
        d[idx] = cloud_distance(gen[i], ref[j], dist);
    });
    return d;
}

inline double mmd_from_matrix(const std::vector<double>& d, int ng, int nr) {
    double total = 0.0;
    for (int j = 0; j < nr; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < ng; ++i) best = std::min(best, d[static_cast<std::size_t>(i) * nr + j]);
        total += best;
    }
    return total / nr;
}

// Nearest reference index per generated cloud; ties go to the lowest index.
inline std::vector<int> nearest_ref(const std::vector<double>& d, int ng, int nr) {
    std::vector<int> arg(ng, 0);
    for (int i = 0; i < ng; ++i) {
        double best = d[static_cast<std::size_t>(i) * nr];
        for (int j = 1; j < nr; ++j) {
            const double cur = d[static_cast<std::size_t>(i) * nr + j];
            if (cur < best) {
                best = cur;
                arg[i] = j;
            }
        }
    }
    return arg;
}

inline double cov_from_matrix(const std::vector<double>& d, int ng, int nr) {
    const auto arg = nearest_ref(d, ng, nr);
    const std::set<int> matched(arg.begin(), arg.end());
    return static_cast<double>(matched.size()) / nr;
}

// Minimum matching distance: mean over the reference set of each reference
// cloud's distance to its nearest generated cloud.
inline double mmd(const CloudSet& gen, const CloudSet& ref, CloudDistance dist, int threads = 0) {
    const auto d = pairwise_distances(gen, ref, dist, threads);
    return mmd_from_matrix(d, static_cast<int>(gen.size()), static_cast<int>(ref.size()));
}

// Coverage: fraction of reference clouds that are some generated cloud's
// nearest neighbor. Argmin ties break toward the lowest reference index.
inline double cov(const CloudSet& gen, const CloudSet& ref, CloudDistance dist, int threads = 0) {
    const auto d = pairwise_distances(gen, ref, dist, threads);
    return cov_from_matrix(d, static_cast<int>(gen.size()), static_cast<int>(ref.size()));
}

namespace detail {

// Cell index on a uniform grid over [-1,1]; exact boundary values fall into
// the lower-index cell.
inline int grid_cell(double c, int res) {
    const double scaled = (c + 1.0) * res / 2.0;
    int idx = static_cast<int>(std::ceil(scaled)) - 1;
    return std::clamp(idx, 0, res - 1);
}

inline std::vector<double> pooled_histogram(const CloudSet& set, int res, int dim) {
    std::size_t cells = 1;
    for (int k = 0; k < dim; ++k) cells *= res;
    std::vector<double> h(cells, 0.0);
    double total = 0.0;
    for (const auto& cloud : set) {
        if (cloud.dim != dim) throw MetricPrecondition("jsd: dimension mismatch within set");
        for (int i = 0; i < cloud.n; ++i) {
            std::size_t idx = 0;
            for (int k = 0; k < dim; ++k) idx = idx * res + grid_cell(cloud.at(i, k), res);
            h[idx] += 1.0;
            total += 1.0;
        }
    }
    for (auto& v : h) v /= total;
    return h;
}

}  // namespace detail

// Jensen-Shannon divergence between the pooled occupancy histograms of the
// two sets, natural log, 0 log 0 == 0. Range [0, ln 2].
inline double jsd(const CloudSet& gen, const CloudSet& ref, int grid_res) {
    if (gen.empty() || ref.empty()) throw MetricPrecondition("jsd: empty set");
    if (grid_res < 2) throw MetricPrecondition("jsd: grid_res must be >= 2");
    const int dim = gen.front().dim;
    const auto p = detail::pooled_histogram(gen, grid_res, dim);
    const auto q = detail::pooled_histogram(ref, grid_res, dim);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
    }
    return acc;
}

}  // namespace rgdm
