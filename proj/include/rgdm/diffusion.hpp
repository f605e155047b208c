#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "rgdm/net.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/rng.hpp"
#include "rgdm/schedule.hpp"

namespace rgdm {

inline void check_t(int t, const NoiseSchedule& sched, const char* where) {
    if (t < 1 || t > sched.T())
        throw InvalidArgument(std::string(where) + ": t=" + std::to_string(t) + " out of 1.." +
                              std::to_string(sched.T()));
}

// X_t = sqrt(alpha_bar_t) X0 + sqrt(1 - alpha_bar_t) eps
inline PointCloud sample_forward(const PointCloud& x0, int t, const PointCloud& eps,
                                 const NoiseSchedule& sched) {
    require_same_shape(x0, eps, "sample_forward");
    check_t(t, sched, "sample_forward");
    const double ab = sched.alpha_bar(t);
    return axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

// Mean of q(X_{t-1} | X_t, X0); collapses onto X0 at t=1.
inline PointCloud posterior_mean(const PointCloud& x_t, const PointCloud& x0, int t,
                                 const NoiseSchedule& sched) {
    require_same_shape(x_t, x0, "posterior_mean");
    check_t(t, sched, "posterior_mean");
    if (t == 1) return x0;  // alpha_bar(0) = 1 makes the X_t coefficient vanish
    const double ab_prev = sched.alpha_bar(t - 1);
    const double ab = sched.alpha_bar(t);
    const double coef_xt = std::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
    const double coef_x0 = sched.beta(t) * std::sqrt(ab_prev) / (1.0 - ab);
    return axpby(coef_xt, x_t, coef_x0, x0);
}

// mu_theta = X_t / sqrt(alpha_t) - (beta_t / sqrt(alpha_t (1-alpha_bar_t))) eps_hat
inline PointCloud mu_theta(const PointCloud& x_t, int t, const PointCloud& eps_hat,
                           const NoiseSchedule& sched) {
    require_same_shape(x_t, eps_hat, "mu_theta");
    const double a = sched.alpha(t);
    const double c = sched.beta(t) / std::sqrt(a * (1.0 - sched.alpha_bar(t)));
    return axpby(1.0 / std::sqrt(a), x_t, -c, eps_hat);
}

// Shorthand for the eps_hat coefficient in mu_theta.
inline double eps_coef(int t, const NoiseSchedule& sched) {
    return sched.beta(t) / std::sqrt(sched.alpha(t) * (1.0 - sched.alpha_bar(t)));
}

// One ancestral step. No noise is injected at t=1 regardless of z.
inline PointCloud reverse_step(const NoiseEstimator& est, const PointCloud& x_t, int t,
                               const PointCloud& z, const NoiseSchedule& sched) {
    require_same_shape(x_t, z, "reverse_step");
    PointCloud mean = mu_theta(x_t, t, predict_noise(est, x_t, t, sched.T()), sched);
    if (t == 1) return mean;
    return axpby(1.0, mean, std::sqrt(sched.beta(t)), z);
}

// Full reverse chain from X_T ~ N(0, I).
inline PointCloud sample(const NoiseEstimator& est, const NoiseSchedule& sched, int n_points,
                         int dim, Rng rng) {
    PointCloud x = normal_cloud(n_points, dim, rng);
    for (int t = sched.T(); t >= 1; --t) {
        PointCloud z = t > 1 ? normal_cloud(n_points, dim, rng) : PointCloud(n_points, dim);
        x = reverse_step(est, x, t, z, sched);
    }
    return x;
}

// Deterministic per seed.
inline PointCloud sample(const NoiseEstimator& est, const NoiseSchedule& sched, int n_points,
                         int dim, std::uint64_t seed) {
    return sample(est, sched, n_points, dim, Rng(seed, 0x73616d70u /* "samp" */));
}

struct DdpmLoss {
    double loss = 0.0;
    ParamGrad grad;
};

// loss = ||eps - eps_theta(X_t, t)||^2 / (2 eta_t). The 1/(2 eta_t) factor is
// kept (not dropped as in simplified DDPM training) so the reward-guided loss
// degenerates onto this one exactly.
inline DdpmLoss ddpm_loss_and_grad(const NoiseEstimator& est, const PointCloud& x0, int t,
                                   const PointCloud& eps, const NoiseSchedule& sched) {
    require_same_shape(x0, eps, "ddpm_loss_and_grad");
    const PointCloud x_t = sample_forward(x0, t, eps, sched);
    const PointCloud eps_hat = predict_noise(est, x_t, t, sched.T());
    const double inv_eta = 1.0 / sched.eta(t);

    DdpmLoss out;
    PointCloud upstream(x0.n, x0.dim);
    for (std::size_t i = 0; i < eps.xs.size(); ++i) {
        const double d = eps.xs[i] - eps_hat.xs[i];
        out.loss += d * d;
        upstream.xs[i] = inv_eta * (eps_hat.xs[i] - eps.xs[i]);
    }
    out.loss *= 0.5 * inv_eta;
    out.grad = backprop(est, x_t, t, sched.T(), upstream);
    return out;
}

}  // namespace rgdm
