#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rgdm/error.hpp"

namespace rgdm {

enum class ScheduleKind { linear, cosine };

inline const char* to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "cosine";
}

// Per-step noise-schedule scalars, precomputed once and immutable afterwards.
// Convention: accessors take t in 1..T; alpha_bar(0) == 1 so the t=1 formulas
// degenerate correctly (the posterior at t=1 collapses onto X0).
class NoiseSchedule {
  public:
    NoiseSchedule(ScheduleKind kind, std::vector<double> beta, double p0, double p1)
        : kind_(kind), beta_(std::move(beta)), param0_(p0), param1_(p1) {
        const int T = static_cast<int>(beta_.size());
        if (T < 1) throw InvalidArgument("schedule: T must be >= 1");
        alpha_.resize(T);
        alpha_bar_.resize(T);
        post_var_.resize(T);
        double prod = 1.0;
        for (int i = 0; i < T; ++i) {
            if (!(beta_[i] > 0.0 && beta_[i] < 1.0))
                throw InvalidArgument("schedule: beta[" + std::to_string(i + 1) +
                                      "] out of (0,1): " + std::to_string(beta_[i]));
            alpha_[i] = 1.0 - beta_[i];
            const double prev = prod;
            prod *= alpha_[i];
            alpha_bar_[i] = prod;
            post_var_[i] = beta_[i] * (1.0 - (i == 0 ? 1.0 : alpha_bar_[i - 1])) / (1.0 - prod);
            (void)prev;
        }
    }

    int T() const { return static_cast<int>(beta_.size()); }
    ScheduleKind kind() const { return kind_; }

    double beta(int t) const { return beta_[check(t) - 1]; }
    double alpha(int t) const { return alpha_[check(t) - 1]; }
    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bar_[check(t) - 1];
    }
    double post_var(int t) const { return post_var_[check(t) - 1]; }
    // Reverse-process variance; tied to beta ("variance-preserving" choice).
    double eta(int t) const { return beta(t); }

    // Construction parameters, kept for checkpoint metadata round-trips:
    // linear -> (beta_1, beta_T); cosine -> (s, unused).
    double param0() const { return param0_; }
    double param1() const { return param1_; }

  private:
    int check(int t) const {
        if (t < 1 || t > T())
            throw InvalidArgument("schedule: t=" + std::to_string(t) + " out of 1.." +
                                  std::to_string(T()));
        return t;
    }

    ScheduleKind kind_;
    std::vector<double> beta_;
    std::vector<double> alpha_, alpha_bar_, post_var_;
    double param0_, param1_;
};

inline NoiseSchedule make_linear_schedule(int T, double beta_1, double beta_T) {
    if (T < 1) throw InvalidArgument("make_linear_schedule: T must be >= 1");
    if (!(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0))
        throw InvalidArgument("make_linear_schedule: need 0 < beta_1 <= beta_T < 1");
    std::vector<double> beta(T);
    for (int t = 1; t <= T; ++t)
        beta[t - 1] = T > 1 ? beta_1 + (t - 1) * (beta_T - beta_1) / (T - 1) : beta_1;
    return NoiseSchedule(ScheduleKind::linear, std::move(beta), beta_1, beta_T);
}

inline NoiseSchedule make_cosine_schedule(int T, double s = 0.008) {
    if (T < 1) throw InvalidArgument("make_cosine_schedule: T must be >= 1");
    if (!(s > 0.0)) throw InvalidArgument("make_cosine_schedule: s must be > 0");
    auto f = [&](int t) {
        const double u = ((static_cast<double>(t) / T + s) / (1.0 + s)) * M_PI / 2.0;
        const double c = std::cos(u);
        return c * c;
    };
    const double f0 = f(0);
    std::vector<double> beta(T);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double ab = f(t) / f0;
        beta[t - 1] = std::min(1.0 - ab / prev, 0.999);
        prev = ab;
    }
    // Derived arrays come from the clipped betas, so the running-product
    // invariant holds exactly even where the clip bites.
    return NoiseSchedule(ScheduleKind::cosine, std::move(beta), s, 0.0);
}

}  // namespace rgdm
