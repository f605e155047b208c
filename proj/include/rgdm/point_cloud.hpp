#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rgdm/error.hpp"
#include "rgdm/rng.hpp"

namespace rgdm {

// One sample: n points of dimension dim, row-major coordinates.
struct PointCloud {
    int n = 0;
    int dim = 0;
    std::vector<double> xs;  // size n*dim

    PointCloud() = default;
    PointCloud(int n_, int dim_) : n(n_), dim(dim_), xs(static_cast<std::size_t>(n_) * dim_, 0.0) {
        if (n_ < 1 || (dim_ != 2 && dim_ != 3 && dim_ != 1))
            throw InvalidArgument("PointCloud: n must be >= 1 and dim in {1,2,3}, got n=" +
                                  std::to_string(n_) + " dim=" + std::to_string(dim_));
    }

    double& at(int i, int k) { return xs[static_cast<std::size_t>(i) * dim + k]; }
    double at(int i, int k) const { return xs[static_cast<std::size_t>(i) * dim + k]; }

    std::size_t size() const { return xs.size(); }

    bool same_shape(const PointCloud& o) const { return n == o.n && dim == o.dim; }

    bool all_finite() const {
        for (double v : xs)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const PointCloud& a, const PointCloud& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(where) + ": shape mismatch (" + std::to_string(a.n) + "x" +
                            std::to_string(a.dim) + " vs " + std::to_string(b.n) + "x" +
                            std::to_string(b.dim) + ")");
}

// Frobenius norm over all coordinates.
inline double frob_norm(const PointCloud& x) {
    double s = 0.0;
    for (double v : x.xs) s += v * v;
    return std::sqrt(s);
}

inline double sq_dist(const PointCloud& a, const PointCloud& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.xs.size(); ++i) {
        const double d = a.xs[i] - b.xs[i];
        s += d * d;
    }
    return s;
}

inline PointCloud normal_cloud(int n, int dim, Rng& rng) {
    PointCloud c(n, dim);
    for (auto& v : c.xs) v = rng.normal();
    return c;
}

// a*x + b*y, elementwise.
inline PointCloud axpby(double a, const PointCloud& x, double b, const PointCloud& y) {
    require_same_shape(x, y, "axpby");
    PointCloud out(x.n, x.dim);
    for (std::size_t i = 0; i < x.xs.size(); ++i) out.xs[i] = a * x.xs[i] + b * y.xs[i];
    return out;
}

using CloudSet = std::vector<PointCloud>;

inline std::vector<double> centroid(const PointCloud& x) {
    std::vector<double> c(x.dim, 0.0);
    for (int i = 0; i < x.n; ++i)
        for (int k = 0; k < x.dim; ++k) c[k] += x.at(i, k);
    for (auto& v : c) v /= x.n;
    return c;
}

}  // namespace rgdm
