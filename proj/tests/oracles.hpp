#pragma once

// Independent oracles for the test suites. Everything here recomputes results
// by a different route than the library (finite differences, exhaustive
// enumeration, quadrature) and must stay free of the code paths it checks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "rgdm/net.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/schedule.hpp"

namespace oracle {

// Central finite differences of f over a parameter vector.
template <typename F>
std::vector<double> fd_gradient(std::vector<double> params, F&& f, double h = 1e-6) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double hi = f(params);
        params[i] = keep - h;
        const double lo = f(params);
        params[i] = keep;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

inline double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

// Scalar-by-scalar concatsquash evaluation for one layer.
inline std::vector<double> concatsquash_scalar(const std::vector<std::vector<double>>& W,
                                               const std::vector<double>& b,
                                               const std::vector<double>& w_gate,
                                               const std::vector<double>& b_gate,
                                               const std::vector<double>& w_bias,
                                               const std::vector<double>& x, double t_ctx) {
    std::vector<double> y(W.size());
    for (std::size_t o = 0; o < W.size(); ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < x.size(); ++i) s += W[o][i] * x[i];
        const double z = w_gate[o] * t_ctx + b_gate[o];
        y[o] = s / (1.0 + std::exp(-z)) + w_bias[o] * t_ctx;
    }
    return y;
}

// Brute-force Chamfer with the declared convention.
inline double chamfer_brute(const rgdm::PointCloud& x, const rgdm::PointCloud& y) {
    auto side = [](const rgdm::PointCloud& a, const rgdm::PointCloud& b) {
        double total = 0.0;
        for (int i = 0; i < a.n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < b.n; ++j) {
                double d = 0.0;
                for (int k = 0; k < a.dim; ++k)
                    d += (a.at(i, k) - b.at(j, k)) * (a.at(i, k) - b.at(j, k));
                best = std::min(best, d);
            }
            total += best;
        }
        return total / a.n;
    };
    return side(x, y) + side(y, x);
}

// EMD via exhaustive permutations; factorial cost, sizes <= 8 only.
inline double emd_brute(const rgdm::PointCloud& x, const rgdm::PointCloud& y) {
    const int n = x.n;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double d = 0.0;
            for (int k = 0; k < x.dim; ++k)
                d += (x.at(i, k) - y.at(perm[i], k)) * (x.at(i, k) - y.at(perm[i], k));
            total += std::sqrt(d);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / n;
}

template <typename Dist>
double mmd_brute(const rgdm::CloudSet& gen, const rgdm::CloudSet& ref, Dist&& dist) {
    double total = 0.0;
    for (const auto& y : ref) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& x : gen) best = std::min(best, dist(x, y));
        total += best;
    }
    return total / ref.size();
}

template <typename Dist>
double cov_brute(const rgdm::CloudSet& gen, const rgdm::CloudSet& ref, Dist&& dist) {
    std::vector<char> hit(ref.size(), 0);
    for (const auto& x : gen) {
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < ref.size(); ++j) {
            const double d = dist(x, ref[j]);
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        hit[arg] = 1;
    }
    double covered = 0.0;
    for (char h : hit) covered += h;
    return covered / ref.size();
}

// Histogram JSD by explicit per-cell interval membership: cell i along an
// axis covers (lo_i, hi_i], cell 0 additionally includes its lower edge.
inline double jsd_brute(const rgdm::CloudSet& gen, const rgdm::CloudSet& ref, int res) {
    const int dim = gen.front().dim;
    auto cell_of = [&](double c) {
        for (int i = 0; i < res; ++i) {
            const double lo = -1.0 + 2.0 * i / res;
            const double hi = -1.0 + 2.0 * (i + 1) / res;
            if ((c > lo || i == 0) && c <= hi) return i;
        }
        return c <= -1.0 ? 0 : res - 1;
    };
    auto hist = [&](const rgdm::CloudSet& set) {
        std::size_t cells = 1;
        for (int k = 0; k < dim; ++k) cells *= res;
        std::vector<double> h(cells, 0.0);
        double total = 0.0;
        for (const auto& c : set)
            for (int i = 0; i < c.n; ++i) {
                std::size_t idx = 0;
                for (int k = 0; k < dim; ++k) idx = idx * res + cell_of(c.at(i, k));
                h[idx] += 1;
                total += 1;
            }
        for (auto& v : h) v /= total;
        return h;
    };
    const auto p = hist(gen), q = hist(ref);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0) acc += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0) acc += 0.5 * q[i] * std::log(q[i] / m);
    }
    return acc;
}

// Posterior mean of q(x_{t-1} | x_t, x0) in 1-D by grid Bayes: discretize
// q(x_{t-1} | x0) q(x_t | x_{t-1}) on a uniform grid and normalize.
inline double grid_bayes_posterior_mean(double x0, double x_t, int t,
                                        const rgdm::NoiseSchedule& sched, int grid = 4096,
                                        double lo = -10.0, double hi = 10.0) {
    const double ab_prev = sched.alpha_bar(t - 1);
    const double mean_prior = std::sqrt(ab_prev) * x0;
    const double var_prior = 1.0 - ab_prev;
    const double a = std::sqrt(sched.alpha(t));
    const double var_like = sched.beta(t);

    double norm = 0.0, acc = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double x = lo + (hi - lo) * (i + 0.5) / grid;
        const double dp = x - mean_prior;
        const double dl = x_t - a * x;
        const double w = std::exp(-0.5 * dp * dp / var_prior - 0.5 * dl * dl / var_like);
        norm += w;
        acc += w * x;
    }
    return acc / norm;
}

// Closed-form maximizer of r(X) = -||X - c||^2 within the radius-d ball
// around x: the pull toward c, projected onto the ball.
inline rgdm::PointCloud quadratic_shift_solution(const rgdm::PointCloud& x,
                                                 const rgdm::PointCloud& c, double d) {
    rgdm::PointCloud v(x.n, x.dim);
    for (std::size_t i = 0; i < v.xs.size(); ++i) v.xs[i] = c.xs[i] - x.xs[i];
    const double norm = rgdm::frob_norm(v);
    if (norm > d)
        for (auto& e : v.xs) e *= d / norm;
    return v;
}

}  // namespace oracle
