#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "rgdm/error.hpp"
#include "rgdm/metrics.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/rng.hpp"
#include "rgdm/schedule.hpp"

namespace rgdm {

enum class ShiftSolver { none, gradient, annealing };

inline const char* to_string(ShiftSolver s) {
    switch (s) {
        case ShiftSolver::none: return "none";
        case ShiftSolver::gradient: return "gradient";
        default: return "annealing";
    }
}

struct GradientSolverConfig {
    int steps = 50;
    double step_scale = 0.1;  // ascent step = step_scale * d
};

struct AnnealingSolverConfig {
    int proposals = 500;
    double sigma_scale = 0.2;  // proposal sd = sigma_scale * d
    double tau_hi = 1.0;       // geometric temperature ladder tau_hi -> tau_lo
    double tau_lo = 0.01;
};

// A reward is a black box; the gradient callable is optional and only the
// gradient solver touches it.
struct RewardSpec {
    std::function<double(const PointCloud&)> reward;
    std::function<PointCloud(const PointCloud&)> grad;
    ShiftSolver solver = ShiftSolver::none;
    double radius = 0.0;  // constant-d override; > 0 disables the per-t rule
    double kappa = 2.0;   // per-t rule: d_t = kappa * sqrt(post_var[t])
    GradientSolverConfig gradient_cfg;
    AnnealingSolverConfig annealing_cfg;
    std::uint64_t seed = 0;
    bool serial_reward = false;  // callable not safe for concurrent invocation

    double radius_at(int t, const NoiseSchedule& sched) const {
        if (radius > 0.0) return radius;
        return kappa * std::sqrt(sched.post_var(t));
    }

    void validate() const {
        if (solver != ShiftSolver::none && !reward)
            throw InvalidArgument("RewardSpec: solver configured without a reward callable");
        if (solver == ShiftSolver::gradient && !grad)
            throw InvalidArgument("RewardSpec: gradient solver requires a gradient callable");
        if (radius == 0.0 && !(kappa > 0.0))
            throw InvalidArgument("RewardSpec: kappa must be > 0 when no constant radius is set");
        if (radius < 0.0) throw InvalidArgument("RewardSpec: radius must be > 0");
    }
};

struct ShiftResult {
    PointCloud eps_star;
    double reward_before = 0.0;
    double reward_after = 0.0;
    int iterations_used = 0;
};

// Carries the iterate at which the reward or gradient went non-finite.
struct SolverFailureAt : SolverFailure {
    PointCloud iterate;
    SolverFailureAt(const std::string& msg, PointCloud it)
        : SolverFailure(msg), iterate(std::move(it)) {}
};

// Scale v into the radius-d L2 ball (Frobenius norm over all coordinates).
inline PointCloud project_to_ball(const PointCloud& v, double d) {
    const double norm = frob_norm(v);
    if (norm <= d) return v;
    PointCloud out = v;
    const double f = d / norm;
    for (auto& c : out.xs) c *= f;
    return out;
}

// Projected gradient ascent from eps = 0; returns the best iterate by reward,
// the zero shift included.
inline ShiftResult solve_shift_gradient(const RewardSpec& spec, const PointCloud& x, double d) {
    if (!spec.grad) throw InvalidArgument("solve_shift_gradient: no gradient callable");
    const double step = spec.gradient_cfg.step_scale * d;

    ShiftResult res;
    res.eps_star = PointCloud(x.n, x.dim);
    res.reward_before = spec.reward(x);
    if (!std::isfinite(res.reward_before))
        throw SolverFailureAt("solve_shift_gradient: non-finite reward at zero shift", x);
    res.reward_after = res.reward_before;

    PointCloud eps(x.n, x.dim);
    for (int k = 0; k < spec.gradient_cfg.steps; ++k) {
        const PointCloud cur = axpby(1.0, x, 1.0, eps);
        const PointCloud g = spec.grad(cur);
        require_same_shape(g, x, "solve_shift_gradient gradient");
        if (!g.all_finite())
            throw SolverFailureAt("solve_shift_gradient: non-finite gradient", cur);
        eps = project_to_ball(axpby(1.0, eps, step, g), d);
        const double r = spec.reward(axpby(1.0, x, 1.0, eps));
        if (!std::isfinite(r))
            throw SolverFailureAt("solve_shift_gradient: non-finite reward", eps);
        ++res.iterations_used;
        if (r > res.reward_after) {
            res.reward_after = r;
            res.eps_star = eps;
        }
    }
    return res;
}

inline ShiftResult solve_shift_gradient(const RewardSpec& spec, const PointCloud& x) {
    if (!(spec.radius > 0.0))
        throw InvalidArgument("solve_shift_gradient: spec.radius must be > 0");
    return solve_shift_gradient(spec, x, spec.radius);
}

// Metropolis random walk inside the ball with a geometric temperature ladder;
// keeps the best-ever iterate. Fully determined by (spec, x, d, rng state).
inline ShiftResult solve_shift_annealing(const RewardSpec& spec, const PointCloud& x, double d,
                                         Rng rng) {
    const auto& cfg = spec.annealing_cfg;
    const double sigma = cfg.sigma_scale * d;

    ShiftResult res;
    res.eps_star = PointCloud(x.n, x.dim);
    res.reward_before = spec.reward(x);
    if (!std::isfinite(res.reward_before))
        throw SolverFailureAt("solve_shift_annealing: non-finite reward at zero shift", x);
    res.reward_after = res.reward_before;

    PointCloud eps(x.n, x.dim);
    double cur_reward = res.reward_before;
    for (int k = 0; k < cfg.proposals; ++k) {
        const double frac = cfg.proposals > 1 ? static_cast<double>(k) / (cfg.proposals - 1) : 0.0;
        const double tau = cfg.tau_hi * std::pow(cfg.tau_lo / cfg.tau_hi, frac);

        PointCloud prop = eps;
        for (auto& c : prop.xs) c += sigma * rng.normal();
        prop = project_to_ball(prop, d);
        const double r = spec.reward(axpby(1.0, x, 1.0, prop));
        if (!std::isfinite(r))
            throw SolverFailureAt("solve_shift_annealing: non-finite reward", prop);
        ++res.iterations_used;

        if (r >= cur_reward || rng.uniform() < std::exp((r - cur_reward) / tau)) {
            eps = std::move(prop);
            cur_reward = r;
        }
        if (r > res.reward_after) {
            res.reward_after = r;
            res.eps_star = eps;
        }
    }
    return res;
}

inline ShiftResult solve_shift_annealing(const RewardSpec& spec, const PointCloud& x, double d) {
    return solve_shift_annealing(spec, x, d, Rng(spec.seed, 0x616e6e65u /* "anne" */));
}

inline ShiftResult solve_shift_annealing(const RewardSpec& spec, const PointCloud& x) {
    if (!(spec.radius > 0.0))
        throw InvalidArgument("solve_shift_annealing: spec.radius must be > 0");
    return solve_shift_annealing(spec, x, spec.radius);
}

// Draw from the payoff distribution in its search reading: the posterior draw
// shifted by the best in-ball perturbation. solver == none (or a zero radius,
// which the per-t rule produces at t=1) keeps the pure DDPM behavior.
inline PointCloud payoff_sample(const RewardSpec& spec, const PointCloud& x_tilde, double d,
                                Rng rng, ShiftResult* result = nullptr) {
    ShiftResult res;
    if (spec.solver == ShiftSolver::none || d <= 0.0) {
        res.eps_star = PointCloud(x_tilde.n, x_tilde.dim);
        res.reward_before = res.reward_after = spec.reward ? spec.reward(x_tilde) : 0.0;
    } else if (spec.solver == ShiftSolver::gradient) {
        res = solve_shift_gradient(spec, x_tilde, d);
    } else {
        res = solve_shift_annealing(spec, x_tilde, d, rng);
    }
    PointCloud out = axpby(1.0, x_tilde, 1.0, res.eps_star);
    if (result) *result = std::move(res);
    return out;
}

inline PointCloud payoff_sample(const RewardSpec& spec, const PointCloud& x_tilde,
                                ShiftResult* result = nullptr) {
    return payoff_sample(spec, x_tilde, spec.radius, Rng(spec.seed, 0x70617930u), result);
}

// ---- built-in reward library (used by the CLI) ----

struct RewardFn {
    std::function<double(const PointCloud&)> value;
    std::function<PointCloud(const PointCloud&)> grad;  // empty for black boxes
};

// Fraction of points inside the axis-aligned box [lo, hi]. Black box.
inline RewardFn region_indicator_reward(std::vector<double> lo, std::vector<double> hi) {
    if (lo.size() != hi.size() || lo.empty())
        throw InvalidArgument("region_indicator: lo/hi must be same nonzero length");
    for (std::size_t k = 0; k < lo.size(); ++k)
        if (!(lo[k] <= hi[k])) throw InvalidArgument("region_indicator: lo must be <= hi");
    RewardFn fn;
    fn.value = [lo = std::move(lo), hi = std::move(hi)](const PointCloud& x) {
        if (static_cast<std::size_t>(x.dim) != lo.size())
            throw ShapeMismatch("region_indicator: box dim != cloud dim");
        int inside = 0;
        for (int i = 0; i < x.n; ++i) {
            bool ok = true;
            for (int k = 0; k < x.dim && ok; ++k)
                ok = x.at(i, k) >= lo[k] && x.at(i, k) <= hi[k];
            inside += ok;
        }
        return static_cast<double>(inside) / x.n;
    };
    return fn;
}

// Mean signed distance of the points to the hyperplane n.x = offset.
inline RewardFn halfplane_margin_reward(std::vector<double> normal, double offset) {
    double nn = 0.0;
    for (double v : normal) nn += v * v;
    if (!(nn > 0.0)) throw InvalidArgument("halfplane_margin: zero normal");
    const double inv_norm = 1.0 / std::sqrt(nn);
    RewardFn fn;
    fn.value = [normal, offset, inv_norm](const PointCloud& x) {
        if (static_cast<std::size_t>(x.dim) != normal.size())
            throw ShapeMismatch("halfplane_margin: normal dim != cloud dim");
        double acc = 0.0;
        for (int i = 0; i < x.n; ++i) {
            double dot = 0.0;
            for (int k = 0; k < x.dim; ++k) dot += normal[k] * x.at(i, k);
            acc += (dot - offset) * inv_norm;
        }
        return acc / x.n;
    };
    fn.grad = [normal, inv_norm](const PointCloud& x) {
        PointCloud g(x.n, x.dim);
        for (int i = 0; i < x.n; ++i)
            for (int k = 0; k < x.dim; ++k) g.at(i, k) = normal[k] * inv_norm / x.n;
        return g;
    };
    return fn;
}

// Negative Chamfer distance to a fixed template cloud. Differentiable almost
// everywhere; at nearest-neighbor ties this returns a subgradient.
inline RewardFn neg_chamfer_reward(PointCloud tmpl) {
    if (tmpl.n < 1) throw InvalidArgument("neg_chamfer: empty template");
    RewardFn fn;
    auto shared = std::make_shared<PointCloud>(std::move(tmpl));
    fn.value = [shared](const PointCloud& x) { return -chamfer(x, *shared); };
    fn.grad = [shared](const PointCloud& x) {
        const PointCloud& y = *shared;
        if (x.dim != y.dim) throw ShapeMismatch("neg_chamfer: template dim != cloud dim");
        PointCloud g(x.n, x.dim);
        // d/dx of the x->y side: 2 (x_i - nn_y(x_i)) / |X|
        for (int i = 0; i < x.n; ++i) {
            int arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < y.n; ++j) {
                double d = 0.0;
                for (int k = 0; k < x.dim; ++k) {
                    const double diff = x.at(i, k) - y.at(j, k);
                    d += diff * diff;
                }
                if (d < best) {
                    best = d;
                    arg = j;
                }
            }
            for (int k = 0; k < x.dim; ++k)
                g.at(i, k) += 2.0 * (x.at(i, k) - y.at(arg, k)) / x.n;
        }
        // d/dx of the y->x side: each y adds 2 (x_nn - y) / |Y| to its nearest x.
        for (int j = 0; j < y.n; ++j) {
            int arg = 0;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < x.n; ++i) {
                double d = 0.0;
                for (int k = 0; k < x.dim; ++k) {
                    const double diff = x.at(i, k) - y.at(j, k);
                    d += diff * diff;
                }
                if (d < best) {
                    best = d;
                    arg = i;
                }
            }
            for (int k = 0; k < x.dim; ++k)
                g.at(arg, k) += 2.0 * (x.at(arg, k) - y.at(j, k)) / y.n;
        }
        for (auto& v : g.xs) v = -v;
        return g;
    };
    return fn;
}

}  // namespace rgdm
