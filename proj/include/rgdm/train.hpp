#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rgdm/diffusion.hpp"
#include "rgdm/error.hpp"
#include "rgdm/net.hpp"
#include "rgdm/optimizer.hpp"
#include "rgdm/parallel.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/reward.hpp"
#include "rgdm/rng.hpp"
#include "rgdm/schedule.hpp"

namespace rgdm {

struct ScheduleSpec {
    ScheduleKind kind = ScheduleKind::linear;
    int T = 100;
    double beta_1 = 1e-4;
    double beta_T = 0.05;
    double cosine_s = 0.008;

    NoiseSchedule make() const {
        return kind == ScheduleKind::linear ? make_linear_schedule(T, beta_1, beta_T)
                                            : make_cosine_schedule(T, cosine_s);
    }
};

struct TrainConfig {
    ScheduleSpec schedule;
    std::vector<int> layer_dims = {2, 64, 128, 64, 2};
    int batch_size = 16;
    long long pretrain_steps = 0;
    long long finetune_steps = 0;
    double lr_pretrain = 1e-3;
    double lr_finetune = 2e-4;
    AdamConfig adam;
    double reward_clip = 5.0;  // R_max
    RewardSpec reward;
    std::uint64_t seed = 0;
    int threads = 0;

    void validate() const {
        if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be >= 1");
        if (pretrain_steps < 0 || finetune_steps < 0)
            throw InvalidArgument("TrainConfig: step counts must be >= 0");
        if (!(lr_pretrain > 0.0 && lr_finetune > 0.0))
            throw InvalidArgument("TrainConfig: learning rates must be > 0");
        if (!(reward_clip > 0.0)) throw InvalidArgument("TrainConfig: reward_clip must be > 0");
        check_topology(layer_dims);
    }
};

struct StepDiag {
    long long step = 0;
    double loss = 0.0;
    double mean_reward = 0.0;
    double mean_shift_norm = 0.0;
};

// In-memory training state; the checkpoint module serializes it.
struct TrainState {
    NoiseEstimator est;
    OptimizerState opt;
    long long pretrain_steps_done = 0;
    long long finetune_steps_done = 0;
    std::vector<StepDiag> finetune_history;
};

struct RgdmDiag {
    double reward = 0.0;      // r(X_{t-1}) at the shifted sample
    double shift_norm = 0.0;  // ||eps*||
    double weight = 1.0;      // exp(clip(r) - r_ref)
};

struct RgdmLoss {
    double loss = 0.0;
    ParamGrad grad;
    RgdmDiag diag;
};

namespace detail {

// Stream salts for the fork tree; values are arbitrary but fixed.
constexpr std::uint64_t kStreamPretrain = 0x7072u;  // "pr"
constexpr std::uint64_t kStreamFinetune = 0x6675u;  // "fu"

struct RgdmSampleCtx {
    PointCloud x_t;
    PointCloud x_prev;  // payoff sample X_{t-1}
    int t = 0;
    double reward = 0.0;
    double shift_norm = 0.0;
};

inline RgdmSampleCtx prepare_rgdm_sample(const PointCloud& x0, int t, const PointCloud& eps,
                                         const RewardSpec& spec, const NoiseSchedule& sched,
                                         Rng solver_rng) {
    RgdmSampleCtx ctx;
    ctx.t = t;
    ctx.x_t = sample_forward(x0, t, eps, sched);
    const PointCloud x_tilde = posterior_mean(ctx.x_t, x0, t, sched);
    ShiftResult shift;
    ctx.x_prev = payoff_sample(spec, x_tilde, spec.radius_at(t, sched), solver_rng, &shift);
    ctx.reward = shift.reward_after;
    ctx.shift_norm = frob_norm(shift.eps_star);
    return ctx;
}

inline RgdmLoss finish_rgdm_sample(const NoiseEstimator& est, const RgdmSampleCtx& ctx,
                                   double reward_clip, double r_ref,
                                   const NoiseSchedule& sched) {
    const double beta = sched.beta(ctx.t);
    const double c = eps_coef(ctx.t, sched);
    const double w = std::exp(std::min(ctx.reward, reward_clip) - r_ref);

    const PointCloud eps_hat = predict_noise(est, ctx.x_t, ctx.t, sched.T());
    const PointCloud mu = mu_theta(ctx.x_t, ctx.t, eps_hat, sched);

    RgdmLoss out;
    out.diag = {ctx.reward, ctx.shift_norm, w};
    // eps* and w come from the stationary payoff distribution: both are
    // constants in the parameter gradient.
    PointCloud upstream(ctx.x_t.n, ctx.x_t.dim);
    double sq = 0.0;
    for (std::size_t i = 0; i < mu.xs.size(); ++i) {
        const double diff = ctx.x_prev.xs[i] - mu.xs[i];
        sq += diff * diff;
        upstream.xs[i] = (c * w / beta) * diff;
    }
    out.loss = w * sq / (2.0 * beta);
    if (!std::isfinite(out.loss))
        throw TrainingFailure("rgdm loss non-finite (t=" + std::to_string(ctx.t) +
                              ", reward=" + std::to_string(ctx.reward) +
                              ", weight=" + std::to_string(w) + ")");
    out.grad = backprop(est, ctx.x_t, ctx.t, sched.T(), upstream);
    return out;
}

inline double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void log_header(std::ostream* log) {
    if (log) *log << "step\tphase\tloss\tmean_reward\tmean_shift_norm\twall_s\n";
}

inline void log_step(std::ostream* log, long long step, const char* phase, double loss,
                     double mean_reward, double mean_shift,
                     std::chrono::steady_clock::time_point start) {
    if (!log) return;
    *log << step << '\t' << phase << '\t' << loss << '\t' << mean_reward << '\t' << mean_shift
         << '\t' << elapsed_s(start) << '\n';
}

}  // namespace detail

// Reward-reweighted biased noise-prediction loss for one sample:
//   X_t   = sqrt(ab_t) X0 + sqrt(1-ab_t) eps
//   X~    = posterior_mean(X_t, X0, t)
//   X_{t-1} = X~ + eps*           (payoff sample)
//   loss  = exp(clip(r) - r_ref) ||X_{t-1} - mu_theta(X_t,t)||^2 / (2 beta_t)
inline RgdmLoss rgdm_loss_and_grad(const NoiseEstimator& est, const PointCloud& x0, int t,
                                   const PointCloud& eps, const RewardSpec& spec,
                                   const NoiseSchedule& sched, double r_ref = 0.0,
                                   double reward_clip = 5.0) {
    require_same_shape(x0, eps, "rgdm_loss_and_grad");
    const auto ctx = detail::prepare_rgdm_sample(x0, t, eps, spec, sched,
                                                 Rng(spec.seed, 0x72676430u /* "rgd0" */));
    return detail::finish_rgdm_sample(est, ctx, reward_clip, r_ref, sched);
}

// MLE pretraining: minibatch averages of the DDPM loss under Adam.
// Every stochastic draw descends from (cfg.seed, step, batch index), so a
// rerun is bitwise identical for any thread count.
inline TrainState pretrain(const TrainConfig& cfg, const CloudSet& data,
                           std::ostream* log = nullptr) {
    cfg.validate();
    if (data.empty()) throw InvalidArgument("pretrain: dataset is empty");
    const NoiseSchedule sched = cfg.schedule.make();

    TrainState state;
    state.est = init_estimator(cfg.layer_dims, cfg.seed);
    state.opt = OptimizerState(state.est.params.size());

    const int B = cfg.batch_size;
    std::vector<double> losses(B);
    std::vector<ParamGrad> grads(B);
    const Rng root = Rng(cfg.seed).fork(detail::kStreamPretrain);
    const auto start = std::chrono::steady_clock::now();
    detail::log_header(log);

    for (long long step = 0; step < cfg.pretrain_steps; ++step) {
        const Rng step_rng = root.fork(static_cast<std::uint64_t>(step));
        parallel_for(B, cfg.threads, [&](int i) {
            Rng rng = step_rng.fork(static_cast<std::uint64_t>(i));
            const PointCloud& x0 = data[rng.uniform_index(data.size())];
            const int t = 1 + static_cast<int>(rng.uniform_index(sched.T()));
            const PointCloud eps = normal_cloud(x0.n, x0.dim, rng);
            auto res = ddpm_loss_and_grad(state.est, x0, t, eps, sched);
            losses[i] = res.loss;
            grads[i] = std::move(res.grad);
        });
        double loss = 0.0;
        ParamGrad grad(state.est.params.size(), 0.0);
        for (int i = 0; i < B; ++i) {
            loss += losses[i];
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += grads[i][j];
        }
        loss /= B;
        for (auto& g : grad) g /= B;
        if (!std::isfinite(loss))
            throw TrainingFailure("pretrain: non-finite loss at step " + std::to_string(step));
        adam_step(state.est.params, grad, state.opt, cfg.lr_pretrain, cfg.adam);
        ++state.pretrain_steps_done;
        detail::log_step(log, step, "pretrain", loss, 0.0, 0.0, start);
    }
    return state;
}

// Reward-guided fine-tuning from an existing state. r_ref is the mean of the
// current batch's clipped rewards, recomputed each step; a fresh optimizer
// starts the phase.
inline TrainState finetune(TrainState state, const TrainConfig& cfg, const CloudSet& data,
                           std::ostream* log = nullptr) {
    cfg.validate();
    if (data.empty()) throw InvalidArgument("finetune: dataset is empty");
    if (state.est.layer_dims != cfg.layer_dims)
        throw ShapeMismatch("finetune: estimator topology does not match config");
    cfg.reward.validate();
    const NoiseSchedule sched = cfg.schedule.make();

    state.opt = OptimizerState(state.est.params.size());
    const int B = cfg.batch_size;
    std::vector<detail::RgdmSampleCtx> ctxs(B);
    std::vector<RgdmLoss> results(B);
    const Rng root = Rng(cfg.seed).fork(detail::kStreamFinetune);
    const auto start = std::chrono::steady_clock::now();
    detail::log_header(log);

    for (long long step = 0; step < cfg.finetune_steps; ++step) {
        const Rng step_rng = root.fork(static_cast<std::uint64_t>(step));
        const int solve_threads = cfg.reward.serial_reward ? 1 : cfg.threads;
        parallel_for(B, solve_threads, [&](int i) {
            Rng rng = step_rng.fork(static_cast<std::uint64_t>(i));
            const PointCloud& x0 = data[rng.uniform_index(data.size())];
            const int t = 1 + static_cast<int>(rng.uniform_index(sched.T()));
            const PointCloud eps = normal_cloud(x0.n, x0.dim, rng);
            ctxs[i] = detail::prepare_rgdm_sample(x0, t, eps, cfg.reward, sched, rng.fork(1));
        });

        double r_ref = 0.0;
        for (const auto& c : ctxs) r_ref += std::min(c.reward, cfg.reward_clip);
        r_ref /= B;

        parallel_for(B, cfg.threads, [&](int i) {
            results[i] = detail::finish_rgdm_sample(state.est, ctxs[i], cfg.reward_clip, r_ref,
                                                    sched);
        });

        double loss = 0.0, mean_r = 0.0, mean_shift = 0.0;
        ParamGrad grad(state.est.params.size(), 0.0);
        for (int i = 0; i < B; ++i) {
            loss += results[i].loss;
            mean_r += results[i].diag.reward;
            mean_shift += results[i].diag.shift_norm;
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += results[i].grad[j];
        }
        loss /= B;
        mean_r /= B;
        mean_shift /= B;
        for (auto& g : grad) g /= B;
        if (!std::isfinite(loss))
            throw TrainingFailure("finetune: non-finite loss at step " + std::to_string(step));
        adam_step(state.est.params, grad, state.opt, cfg.lr_finetune, cfg.adam);
        ++state.finetune_steps_done;
        state.finetune_history.push_back({step, loss, mean_r, mean_shift});
        detail::log_step(log, step, "finetune", loss, mean_r, mean_shift, start);
    }
    return state;
}

}  // namespace rgdm
