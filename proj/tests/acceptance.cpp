// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 7 and 8 train real models and dominate the runtime; pass
// criterion numbers as arguments to run a subset during development.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rgdm/cli.hpp"
#include "rgdm/rgdm.hpp"

using namespace rgdm;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] C%d %s: %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

PointCloud random_cloud(int n, int dim, Rng& rng, double scale = 1.0) {
    PointCloud c(n, dim);
    for (auto& v : c.xs) v = scale * rng.normal();
    return c;
}

NoiseEstimator random_estimator(const std::vector<int>& dims, std::uint64_t seed) {
    NoiseEstimator est = init_estimator(dims, seed);
    Rng rng(seed, 0xabcdef);
    for (auto& p : est.params) p = 0.5 * rng.normal();
    return est;
}

double elapsed_s(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

// ---- C1: backprop vs central finite differences, 100 nets, < 10 s ----
void criterion1() {
    const auto t0 = clk::now();
    double worst = 0.0;
    Rng rng(4001);
    for (int rep = 0; rep < 100; ++rep) {
        const auto est = random_estimator({2, 8, 8, 2}, 7000 + rep);
        const auto x = random_cloud(4, 2, rng);
        const auto u = random_cloud(4, 2, rng);
        const int t = 1 + static_cast<int>(rng.uniform_index(10));
        const auto analytic = backprop(est, x, t, 10, u);
        const auto fd = oracle::fd_gradient(est.params, [&](const std::vector<double>& p) {
            NoiseEstimator e2 = est;
            e2.params = p;
            const auto out = predict_noise(e2, x, t, 10);
            double s = 0.0;
            for (std::size_t i = 0; i < out.xs.size(); ++i) s += u.xs[i] * out.xs[i];
            return s;
        });
        worst = std::max(worst, oracle::rel_err(analytic, fd));
    }
    const double secs = elapsed_s(t0);
    report(1, "gradient-correctness", worst < 1e-5 && secs < 10.0,
           fmt("max rel err %.3g (< 1e-5), %.2f s (< 10 s)", worst, secs));
}

// ---- C2: chain simulation vs closed-form marginal at t in {10,50,100} ----
void criterion2() {
    const auto sched = make_linear_schedule(100, 1e-4, 0.05);
    PointCloud x0(2, 2);
    x0.at(0, 0) = 1.3;  x0.at(0, 1) = -0.7;
    x0.at(1, 0) = 0.4;  x0.at(1, 1) = 2.1;
    const int draws = 100000;
    const std::vector<int> stops = {10, 50, 100};

    std::vector<std::vector<double>> sum(stops.size(), std::vector<double>(4, 0.0));
    auto sumsq = sum;
    Rng rng(4002);
    for (int i = 0; i < draws; ++i) {
        PointCloud x = x0;
        std::size_t next = 0;
        for (int t = 1; t <= 100; ++t) {
            const double keep = std::sqrt(1.0 - sched.beta(t));
            const double add = std::sqrt(sched.beta(t));
            for (auto& v : x.xs) v = keep * v + add * rng.normal();
            if (next < stops.size() && t == stops[next]) {
                for (int k = 0; k < 4; ++k) {
                    sum[next][k] += x.xs[k];
                    sumsq[next][k] += x.xs[k] * x.xs[k];
                }
                ++next;
            }
        }
    }

    bool pass = true;
    double worst_mean = 0.0, worst_ratio = 1.0;
    for (std::size_t s = 0; s < stops.size(); ++s) {
        const double ab = sched.alpha_bar(stops[s]);
        for (int k = 0; k < 4; ++k) {
            const double mean = sum[s][k] / draws;
            const double var = sumsq[s][k] / draws - mean * mean;
            const double mean_err = std::abs(mean - std::sqrt(ab) * x0.xs[k]);
            const double ratio = var / (1.0 - ab);
            worst_mean = std::max(worst_mean, mean_err);
            if (std::abs(ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = ratio;
            pass = pass && mean_err < 0.02 && ratio > 0.9 && ratio < 1.1;
        }
    }
    report(2, "marginal-consistency", pass,
           fmt("worst |mean err| %.4f (< 0.02), worst var ratio %.3f (in [0.9,1.1])", worst_mean,
               worst_ratio));
}

// ---- C3: Eq.-4 posterior mean vs 4096-point grid Bayes ----
void criterion3() {
    const auto sched = make_linear_schedule(100, 1e-4, 0.05);
    Rng rng(4003);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const double x0 = rng.uniform_in(-3.0, 3.0);
        const double xt = rng.uniform_in(-3.0, 3.0);
        // t >= 2: at t = 1 the posterior is the point mass at X0 and the
        // grid density is degenerate.
        const int t = 2 + static_cast<int>(rng.uniform_index(99));
        PointCloud c0(1, 1), ct(1, 1);
        c0.at(0, 0) = x0;
        ct.at(0, 0) = xt;
        const double got = posterior_mean(ct, c0, t, sched).at(0, 0);
        const double expect = oracle::grid_bayes_posterior_mean(x0, xt, t, sched, 4096);
        worst = std::max(worst, std::abs(got - expect));
    }
    report(3, "posterior-grid-bayes", worst < 1e-3, fmt("max abs err %.3g (< 1e-3)", worst));
}

// ---- C4: constant-reward zero-shift RGDM gradient is parallel to DDPM ----
void criterion4() {
    const auto sched = make_linear_schedule(100, 1e-4, 0.05);
    RewardSpec const_reward;
    const_reward.reward = [](const PointCloud&) { return 0.7; };
    const_reward.solver = ShiftSolver::none;

    Rng rng(4004);
    double worst = 1.0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto est = random_estimator({2, 8, 8, 2}, 9000 + rep);
        const auto x0 = random_cloud(6, 2, rng);
        const auto eps = random_cloud(6, 2, rng);
        const int t = 1 + static_cast<int>(rng.uniform_index(100));
        const auto dd = ddpm_loss_and_grad(est, x0, t, eps, sched);
        const auto rg = rgdm_loss_and_grad(est, x0, t, eps, const_reward, sched);
        worst = std::min(worst, oracle::cosine(rg.grad, dd.grad));
    }
    report(4, "degeneracy-equivalence", std::abs(worst - 1.0) <= 1e-9,
           fmt("min cosine similarity 1 - %.3g (within 1e-9)", 1.0 - worst));
}

// ---- C5: gradient shift solver vs closed-form ball-projected maximizer ----
void criterion5() {
    Rng rng(4005);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const bool inside = rep < 10;
        const double d = 0.5 + rng.uniform();
        const auto x = random_cloud(8, 2, rng);
        PointCloud dir = random_cloud(8, 2, rng);
        const double len = (inside ? 0.2 + 0.7 * rng.uniform() : 1.2 + 1.5 * rng.uniform()) * d;
        const double scale = len / frob_norm(dir);
        PointCloud target = x;
        for (std::size_t i = 0; i < dir.xs.size(); ++i) target.xs[i] += scale * dir.xs[i];

        RewardSpec spec;
        spec.reward = [target](const PointCloud& c) { return -sq_dist(c, target); };
        spec.grad = [target](const PointCloud& c) {
            PointCloud g(c.n, c.dim);
            for (std::size_t i = 0; i < g.xs.size(); ++i)
                g.xs[i] = -2.0 * (c.xs[i] - target.xs[i]);
            return g;
        };
        spec.solver = ShiftSolver::gradient;
        spec.radius = d;
        spec.gradient_cfg.steps = 200;

        const auto res = solve_shift_gradient(spec, x);
        const auto expect = oracle::quadratic_shift_solution(x, target, d);
        for (std::size_t i = 0; i < expect.xs.size(); ++i)
            worst = std::max(worst, std::abs(res.eps_star.xs[i] - expect.xs[i]));
    }
    report(5, "shift-solver-optimality", worst < 1e-6, fmt("max coord err %.3g (< 1e-6)", worst));
}

// ---- C6: metrics vs exhaustive brute-force oracles ----
void criterion6() {
    Rng rng(4006);
    double worst = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
        const int n_pts = 2 + static_cast<int>(rng.uniform_index(7));  // <= 8
        CloudSet gen, ref;
        const int ng = 1 + static_cast<int>(rng.uniform_index(8));
        const int nr = 1 + static_cast<int>(rng.uniform_index(8));
        for (int i = 0; i < ng; ++i) gen.push_back(random_cloud(n_pts, 2, rng, 0.45));
        for (int i = 0; i < nr; ++i) ref.push_back(random_cloud(n_pts, 2, rng, 0.45));

        worst = std::max(worst, std::abs(chamfer(gen[0], ref[0]) -
                                         oracle::chamfer_brute(gen[0], ref[0])));
        worst = std::max(worst, std::abs(emd(gen[0], ref[0]) -
                                         oracle::emd_brute(gen[0], ref[0])));
        const auto cd = [](const PointCloud& a, const PointCloud& b) { return chamfer(a, b); };
        const auto ed = [](const PointCloud& a, const PointCloud& b) { return emd(a, b); };
        worst = std::max(worst, std::abs(mmd(gen, ref, CloudDistance::cd) -
                                         oracle::mmd_brute(gen, ref, cd)));
        worst = std::max(worst, std::abs(mmd(gen, ref, CloudDistance::emd) -
                                         oracle::mmd_brute(gen, ref, ed)));
        worst = std::max(worst, std::abs(cov(gen, ref, CloudDistance::cd) -
                                         oracle::cov_brute(gen, ref, cd)));
        worst = std::max(worst, std::abs(cov(gen, ref, CloudDistance::emd) -
                                         oracle::cov_brute(gen, ref, ed)));
        worst = std::max(worst, std::abs(jsd(gen, ref, 4) - oracle::jsd_brute(gen, ref, 4)));
    }
    report(6, "metrics-oracle-equivalence", worst < 1e-9, fmt("max |diff| %.3g (< 1e-9)", worst));
}

// ---- shared machinery for C7/C8 ----
struct SteeringSetup {
    Dataset data;
    TrainState pretrained;
    TrainConfig cfg;
    CloudSet right_ref_norm;  // normalized right-mode reference set
    double pre_fraction = 0.0;
    double pre_mmd = 0.0;
    double setup_seconds = 0.0;
};

double right_fraction(const CloudSet& clouds) {
    int right = 0;
    for (const auto& c : clouds) right += centroid(c)[0] > 0.0;
    return static_cast<double>(right) / clouds.size();
}

CloudSet draw_samples(const NoiseEstimator& est, const NoiseSchedule& sched, int count,
                      std::uint64_t seed) {
    CloudSet out(count);
    const Rng root = Rng(seed).fork(0x616363u);
    parallel_for(count, 0, [&](int i) { out[i] = sample(est, sched, 128, 2, root.fork(i)); });
    return out;
}

CloudSet normalized(const CloudSet& in) {
    CloudSet out;
    out.reserve(in.size());
    for (const auto& c : in) out.push_back(normalize_bbox(c));
    return out;
}

SteeringSetup steering_setup() {
    const auto t0 = clk::now();
    SteeringSetup s;
    s.data = gen_mixture2d(1024, 128, {{-2.0, 0.0}, {2.0, 0.0}}, 0.2, 15);

    // Schedule note: under the kept 1/(2 eta_t) loss weight, a beta_T/beta_1
    // ratio of 500 starves the large-t steps that decide a trajectory's mode,
    // and the pretrained sampler collapses into one basin. A 10:1 ratio keeps
    // the weight spread modest, so mode balance actually trains.
    s.cfg.schedule = {ScheduleKind::linear, 200, 0.005, 0.05, 0.008};
    s.cfg.layer_dims = {2, 64, 128, 64, 2};
    s.cfg.batch_size = 16;
    s.cfg.pretrain_steps = 3000;
    s.cfg.finetune_steps = 2000;
    s.cfg.lr_pretrain = 1e-3;
    s.cfg.lr_finetune = 5e-4;
    s.cfg.seed = 21;

    s.pretrained = pretrain(s.cfg, s.data.clouds);
    std::fprintf(stderr, "  [c7] pretrain done at %.0f s\n", elapsed_s(t0));

    const auto sched = s.cfg.schedule.make();
    const auto pre_samples = draw_samples(s.pretrained.est, sched, 200, 501);
    s.pre_fraction = right_fraction(pre_samples);

    // module example: nearly all generated points sit within 3 sigma of a
    // mode center once pretraining has fit the mixture
    int total = 0, near = 0;
    for (const auto& c : pre_samples)
        for (int p = 0; p < c.n; ++p) {
            const double dl = std::hypot(c.at(p, 0) + 2.0, c.at(p, 1));
            const double dr = std::hypot(c.at(p, 0) - 2.0, c.at(p, 1));
            near += std::min(dl, dr) <= 0.6;
            ++total;
        }
    const double conc = static_cast<double>(near) / total;
    std::printf("[%s] EX sample-concentration: %.4f of generated points within 3 sigma of a mode "
                "(>= 0.95)\n",
                conc >= 0.95 ? "PASS" : "FAIL", conc);
    if (conc < 0.95) ++g_failures;

    const auto right_ref = gen_mixture2d(100, 128, {{2.0, 0.0}}, 0.2, 33);
    s.right_ref_norm = normalized(right_ref.clouds);
    s.pre_mmd = mmd(normalized(pre_samples), s.right_ref_norm, CloudDistance::cd);
    s.setup_seconds = elapsed_s(t0);
    std::fprintf(stderr, "  [c7] pretrained fraction %.3f, mmd-cd %.4f, %.0f s\n", s.pre_fraction,
                 s.pre_mmd, s.setup_seconds);
    return s;
}

// ---- C7: halfplane reward + gradient solver steers to the right mode ----
void criterion7(SteeringSetup& s) {
    const auto t0 = clk::now();
    auto cfg = s.cfg;
    const auto fn = halfplane_margin_reward({1.0, 0.0}, 0.0);
    cfg.reward.reward = fn.value;
    cfg.reward.grad = fn.grad;
    cfg.reward.solver = ShiftSolver::gradient;
    cfg.reward.kappa = 2.0;

    TrainState state;
    state.est = s.pretrained.est;
    state.opt = OptimizerState(state.est.params.size());
    state.pretrain_steps_done = s.pretrained.pretrain_steps_done;
    state = finetune(std::move(state), cfg, s.data.clouds);
    std::fprintf(stderr, "  [c7] finetune done at %.0f s\n", elapsed_s(t0));

    const auto sched = cfg.schedule.make();
    const auto fine_samples = draw_samples(state.est, sched, 200, 502);
    const double fine_fraction = right_fraction(fine_samples);
    const double fine_mmd = mmd(normalized(fine_samples), s.right_ref_norm, CloudDistance::cd);
    const double total = s.setup_seconds + elapsed_s(t0);

    const bool pass = s.pre_fraction >= 0.4 && s.pre_fraction <= 0.6 && fine_fraction >= 0.8 &&
                      fine_mmd < s.pre_mmd && total < 600.0;
    report(7, "steering-halfplane", pass,
           fmt("fraction %.3f -> %.3f (0.5+-0.1 -> >= 0.8), mmd-cd %.4f -> %.4f (strictly lower), "
               "%.0f s (< 600 s)",
               s.pre_fraction, fine_fraction, s.pre_mmd, fine_mmd, total));
}

// ---- C8: region-indicator reward + annealing solver ----
void criterion8(SteeringSetup& s) {
    const auto t0 = clk::now();
    auto cfg = s.cfg;
    const auto fn = region_indicator_reward({0.0, -10.0}, {10.0, 10.0});
    cfg.reward.reward = fn.value;
    cfg.reward.solver = ShiftSolver::annealing;
    cfg.reward.kappa = 2.0;
    cfg.reward.seed = 67;

    TrainState state;
    state.est = s.pretrained.est;
    state.opt = OptimizerState(state.est.params.size());
    state = finetune(std::move(state), cfg, s.data.clouds);
    std::fprintf(stderr, "  [c8] finetune done at %.0f s\n", elapsed_s(t0));

    const auto sched = cfg.schedule.make();
    const auto fine_samples = draw_samples(state.est, sched, 200, 503);
    const double fine_fraction = right_fraction(fine_samples);
    report(8, "steering-blackbox-annealing", fine_fraction >= 0.7,
           fmt("right-half fraction %.3f (>= 0.7), %.0f s", fine_fraction, elapsed_s(t0)));
}

// ---- C9: bitwise-identical metrics report across two pipeline runs ----
void criterion9() {
    const auto root = fs::temp_directory_path() / ("rgdm_accept_c9_" + std::to_string(::getpid()));
    fs::remove_all(root);
    auto run_pipeline = [&](const std::string& tag) {
        const fs::path dir = root / tag;
        fs::create_directories(dir);
        nlohmann::json j = {
            {"seed", 77},
            {"out_dir", "run"},
            {"data",
             {{"path", "data"},
              {"generator",
               {{"kind", "mixture2d"},
                {"n_samples", 64},
                {"points_per_cloud", 32},
                {"centers", {{-2.0, 0.0}, {2.0, 0.0}}},
                {"sigma", 0.2},
                {"seed", 5}}}}},
            {"schedule", {{"kind", "linear"}, {"T", 20}, {"beta_1", 1e-3}, {"beta_T", 0.1}}},
            {"model", {{"layer_dims", {2, 16, 16, 2}}}},
            {"train",
             {{"batch_size", 8}, {"pretrain_steps", 150}, {"finetune_steps", 100},
              {"lr_finetune", 1e-3}}},
            {"reward",
             {{"kind", "halfplane_margin"}, {"solver", "gradient"}, {"normal", {1.0, 0.0}},
              {"offset", 0.0}, {"kappa", 2.0}}},
            {"sampling", {{"n_samples", 32}, {"n_points", 32}, {"seed", 9}}},
            {"eval", {{"grid_res", 16}}},
        };
        const auto cfg_path = dir / "config.json";
        std::ofstream(cfg_path) << j.dump();
        int rc = 0;
        rc |= cli::run({"make-data", "--config", cfg_path.string()});
        rc |= cli::run({"pretrain", "--config", cfg_path.string()});
        rc |= cli::run({"finetune", "--config", cfg_path.string()});
        rc |= cli::run({"sample", "--ckpt", (dir / "run" / "finetuned.ckpt").string(), "--n", "32",
                        "--seed", "9", "--out", (dir / "samples").string()});
        rc |= cli::run({"eval", "--gen", (dir / "samples").string(), "--ref",
                        (dir / "data").string(), "--grid-res", "16", "--out",
                        (dir / "report").string()});
        return rc;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };

    const int rc1 = run_pipeline("a");
    const int rc2 = run_pipeline("b");
    const std::string rep_a = slurp(root / "a" / "report" / "metrics.tsv");
    const std::string rep_b = slurp(root / "b" / "report" / "metrics.tsv");
    const std::string csv_a = slurp(root / "a" / "report" / "matches.csv");
    const std::string csv_b = slurp(root / "b" / "report" / "matches.csv");
    const bool pass = rc1 == 0 && rc2 == 0 && !rep_a.empty() && rep_a == rep_b && csv_a == csv_b;
    report(9, "pipeline-reproducibility", pass,
           fmt("exit codes %d/%d, reports %s (%zu bytes)", rc1, rc2,
               rep_a == rep_b ? "bitwise identical" : "DIFFER", rep_a.size()));
    fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int c) { return wanted.empty() || wanted.count(c) > 0; };

    if (want(1)) criterion1();
    if (want(2)) criterion2();
    if (want(3)) criterion3();
    if (want(4)) criterion4();
    if (want(5)) criterion5();
    if (want(6)) criterion6();
    if (want(7) || want(8)) {
        auto setup = steering_setup();
        if (want(7)) criterion7(setup);
        if (want(8)) criterion8(setup);
    }
    if (want(9)) criterion9();

    if (g_failures) std::printf("%d criterion(s) FAILED\n", g_failures);
    else std::printf("all criteria passed\n");
    return g_failures ? 1 : 0;
}
