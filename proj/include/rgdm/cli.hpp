#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rgdm/checkpoint.hpp"
#include "rgdm/config.hpp"
#include "rgdm/data.hpp"
#include "rgdm/diffusion.hpp"
#include "rgdm/error.hpp"
#include "rgdm/metrics.hpp"
#include "rgdm/parallel.hpp"
#include "rgdm/train.hpp"

namespace rgdm::cli {

namespace fs = std::filesystem;

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline nlohmann::json schedule_meta(const ScheduleSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"T", s.T},
            {"beta_1", s.beta_1},
            {"beta_T", s.beta_T},
            {"s", s.cosine_s}};
}

inline ScheduleSpec schedule_from_meta(const nlohmann::json& m) {
    ScheduleSpec s;
    const auto kind = m.value("kind", "linear");
    if (kind == "linear") s.kind = ScheduleKind::linear;
    else if (kind == "cosine") s.kind = ScheduleKind::cosine;
    else throw CheckpointError("checkpoint: unknown schedule kind '" + kind + "'");
    s.T = m.value("T", 100);
    s.beta_1 = m.value("beta_1", 1e-4);
    s.beta_T = m.value("beta_T", 0.05);
    s.cosine_s = m.value("s", 0.008);
    return s;
}

inline Checkpoint make_checkpoint(const TrainState& state, const RunConfig& cfg,
                                  int points_per_cloud, int dim,
                                  const nlohmann::json& reward_summary) {
    Checkpoint ckpt;
    ckpt.meta = {{"schedule", schedule_meta(cfg.schedule)},
                 {"layer_dims", state.est.layer_dims},
                 {"pretrain_steps_done", state.pretrain_steps_done},
                 {"finetune_steps_done", state.finetune_steps_done},
                 {"seed", cfg.seed},
                 {"points_per_cloud", points_per_cloud},
                 {"dim", dim},
                 {"reward", reward_summary},
                 {"has_optimizer_state", true},
                 {"optimizer_step", state.opt.step}};
    if (!state.finetune_history.empty()) {
        nlohmann::json rewards = nlohmann::json::array();
        nlohmann::json shifts = nlohmann::json::array();
        for (const auto& d : state.finetune_history) {
            rewards.push_back(d.mean_reward);
            shifts.push_back(d.mean_shift_norm);
        }
        ckpt.meta["reward_history"] = std::move(rewards);
        ckpt.meta["shift_history"] = std::move(shifts);
    }
    ckpt.params = state.est.params;
    ckpt.opt = state.opt;
    return ckpt;
}

inline NoiseEstimator estimator_from_checkpoint(const Checkpoint& ckpt) {
    NoiseEstimator est;
    if (!ckpt.meta.contains("layer_dims"))
        throw CheckpointError("checkpoint: metadata lacks 'layer_dims'");
    est.layer_dims = ckpt.meta["layer_dims"].get<std::vector<int>>();
    check_topology(est.layer_dims);
    if (static_cast<int>(ckpt.params.size()) != est.param_count())
        throw CheckpointError("checkpoint: parameter count " + std::to_string(ckpt.params.size()) +
                              " does not match topology (" +
                              std::to_string(est.param_count()) + ")");
    est.params = ckpt.params;
    return est;
}

// Training data lives either at <path> or, when make-data wrote splits,
// at <path>/train.
inline Dataset load_train_dataset(const fs::path& path) {
    if (fs::exists(path / "train" / "manifest.json")) return load_dataset(path / "train");
    return load_dataset(path);
}

}  // namespace detail

inline int cmd_make_data(const RunConfig& cfg, const fs::path& base) {
    if (!cfg.generator.present)
        throw ConfigError("config: 'data.generator' is required for make-data");
    if (cfg.data_path.empty()) throw ConfigError("config: 'data.path' is required for make-data");
    const Dataset ds = cfg.generator.generate();
    const fs::path root = detail::resolve(base, cfg.data_path);

    std::map<int, int> counts;
    for (int l : ds.labels) ++counts[l];

    if (cfg.split_cfg.present) {
        auto [train, val, test] = split(ds, cfg.split_cfg.train, cfg.split_cfg.val,
                                        cfg.split_cfg.test, cfg.split_cfg.seed);
        save_dataset(train, root / "train");
        save_dataset(val, root / "val");
        save_dataset(test, root / "test");
        std::cout << "wrote " << train.size() << "/" << val.size() << "/" << test.size()
                  << " train/val/test samples to " << root.string() << "\n";
    } else {
        save_dataset(ds, root);
        std::cout << "wrote " << ds.size() << " samples to " << root.string() << "\n";
    }
    for (const auto& [label, count] : counts)
        std::cout << "label " << label << ": " << count << " samples\n";
    return 0;
}

inline int cmd_pretrain(const RunConfig& cfg, const fs::path& base) {
    if (cfg.data_path.empty()) throw ConfigError("config: 'data.path' is required for pretrain");
    const Dataset ds = detail::load_train_dataset(detail::resolve(base, cfg.data_path));
    TrainConfig tc = cfg.to_train_config(base, /*with_reward=*/false);
    tc.validate();

    const fs::path out = detail::resolve(base, cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output dir '" + out.string() + "': " + ec.message());
    std::ofstream log(out / "pretrain.log");
    if (!log) throw IoError("cannot open '" + (out / "pretrain.log").string() + "'");

    const TrainState state = pretrain(tc, ds.clouds, &log);
    const int pts = ds.clouds.empty() ? 0 : ds.clouds.front().n;
    const Checkpoint ckpt = detail::make_checkpoint(state, cfg, pts, ds.dim,
                                                    nlohmann::json("none"));
    save_checkpoint(ckpt, out / "pretrained.ckpt");
    std::cout << "pretrained " << state.pretrain_steps_done << " steps; checkpoint at "
              << (out / "pretrained.ckpt").string() << "\n";
    return 0;
}

inline int cmd_finetune(const RunConfig& cfg, const fs::path& ckpt_path, const fs::path& base) {
    const Checkpoint in = load_checkpoint(ckpt_path);
    NoiseEstimator est = detail::estimator_from_checkpoint(in);
    if (est.layer_dims != cfg.layer_dims)
        throw CheckpointError("checkpoint topology does not match config 'model.layer_dims'");

    if (cfg.data_path.empty()) throw ConfigError("config: 'data.path' is required for finetune");
    const Dataset ds = detail::load_train_dataset(detail::resolve(base, cfg.data_path));
    TrainConfig tc = cfg.to_train_config(base, /*with_reward=*/true);
    tc.validate();
    tc.reward.validate();

    const fs::path out = detail::resolve(base, cfg.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output dir '" + out.string() + "': " + ec.message());
    std::ofstream log(out / "finetune.log");
    if (!log) throw IoError("cannot open '" + (out / "finetune.log").string() + "'");

    TrainState state;
    state.est = std::move(est);
    state.opt = OptimizerState(state.est.params.size());
    state.pretrain_steps_done = in.meta.value("pretrain_steps_done", 0LL);

    state = finetune(std::move(state), tc, ds.clouds, &log);
    const int pts = ds.clouds.empty() ? 0 : ds.clouds.front().n;
    nlohmann::json rsummary = {{"kind", cfg.reward.kind},
                               {"solver", cfg.reward.solver},
                               {"kappa", cfg.reward.kappa},
                               {"radius", cfg.reward.radius}};
    const Checkpoint ckpt = detail::make_checkpoint(state, cfg, pts, ds.dim, rsummary);
    save_checkpoint(ckpt, out / "finetuned.ckpt");
    std::cout << "finetuned " << state.finetune_steps_done << " steps; checkpoint at "
              << (out / "finetuned.ckpt").string() << "\n";
    return 0;
}

inline int cmd_sample(const fs::path& ckpt_path, int n_samples, int n_points, std::uint64_t seed,
                      const fs::path& out_dir, int threads) {
    if (n_samples < 0) throw InvalidArgument("sample: n must be >= 0");
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const NoiseEstimator est = detail::estimator_from_checkpoint(ckpt);
    const NoiseSchedule sched = detail::schedule_from_meta(
        ckpt.meta.contains("schedule") ? ckpt.meta["schedule"] : nlohmann::json::object()).make();
    const int dim = est.point_dim();
    if (n_points <= 0) n_points = ckpt.meta.value("points_per_cloud", 128);
    if (n_points <= 0) n_points = 128;

    Dataset out;
    out.dim = dim;
    out.clouds.resize(n_samples);
    out.labels.assign(n_samples, -1);
    const Rng root = Rng(seed).fork(0x736d706cu /* "smpl" */);
    parallel_for(n_samples, threads, [&](int i) {
        out.clouds[i] = sample(est, sched, n_points, dim, root.fork(i));
    });
    out.generator = {{"kind", "sampled"}, {"seed", seed}, {"n_samples", n_samples}};
    save_dataset(out, out_dir);
    std::cout << "sampled " << n_samples << " clouds to " << out_dir.string() << "\n";
    return 0;
}

struct EvalOptions {
    int grid_res = 32;
    int target_label = -1;
    int threads = 0;
};

inline int cmd_eval(const fs::path& gen_dir, const fs::path& ref_dir, const EvalOptions& opt,
                    const fs::path& out_dir) {
    const Dataset gen_ds = load_dataset(gen_dir);
    const Dataset ref_ds = load_dataset(ref_dir);

    CloudSet gen, ref;
    for (const auto& c : gen_ds.clouds) gen.push_back(normalize_bbox(c));
    for (std::size_t i = 0; i < ref_ds.clouds.size(); ++i)
        if (opt.target_label < 0 || ref_ds.labels[i] == opt.target_label)
            ref.push_back(normalize_bbox(ref_ds.clouds[i]));
    if (gen.empty()) throw MetricPrecondition("eval: generated set is empty");
    if (ref.empty()) throw MetricPrecondition("eval: reference set is empty (after label filter)");

    for (std::size_t i = 0; i < gen.size(); ++i)
        for (std::size_t j = 0; j < ref.size(); ++j)
            if (gen[i].n != ref[j].n)
                throw MetricPrecondition("eval: EMD needs equal-size clouds; gen[" +
                                         std::to_string(i) + "] has " + std::to_string(gen[i].n) +
                                         " points, ref[" + std::to_string(j) + "] has " +
                                         std::to_string(ref[j].n));

    const int ng = static_cast<int>(gen.size());
    const int nr = static_cast<int>(ref.size());
    const auto d_cd = pairwise_distances(gen, ref, CloudDistance::cd, opt.threads);
    const auto d_emd = pairwise_distances(gen, ref, CloudDistance::emd, opt.threads);

    std::vector<std::pair<std::string, double>> report = {
        {"mmd_cd", mmd_from_matrix(d_cd, ng, nr)},
        {"mmd_emd", mmd_from_matrix(d_emd, ng, nr)},
        {"cov_cd", cov_from_matrix(d_cd, ng, nr)},
        {"cov_emd", cov_from_matrix(d_emd, ng, nr)},
        {"jsd", jsd(gen, ref, opt.grid_res)},
    };

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output dir '" + out_dir.string() + "': " + ec.message());
    std::ofstream rep(out_dir / "metrics.tsv");
    if (!rep) throw IoError("cannot open '" + (out_dir / "metrics.tsv").string() + "'");
    for (const auto& [name, value] : report) {
        rep << name << '\t' << detail::fmt17(value) << '\n';
        std::cout << name << '\t' << detail::fmt17(value) << '\n';
    }
    if (!rep.good()) throw IoError("metrics report write failed");

    const auto arg_cd = nearest_ref(d_cd, ng, nr);
    const auto arg_emd = nearest_ref(d_emd, ng, nr);
    std::ofstream csv(out_dir / "matches.csv");
    if (!csv) throw IoError("cannot open '" + (out_dir / "matches.csv").string() + "'");
    csv << "gen_index,ref_index_cd,dist_cd,ref_index_emd,dist_emd\n";
    for (int i = 0; i < ng; ++i)
        csv << i << ',' << arg_cd[i] << ','
            << detail::fmt17(d_cd[static_cast<std::size_t>(i) * nr + arg_cd[i]]) << ','
            << arg_emd[i] << ','
            << detail::fmt17(d_emd[static_cast<std::size_t>(i) * nr + arg_emd[i]]) << '\n';
    return 0;
}

inline const char* kConfigHelp = R"(Config file: one JSON document; unknown keys are errors.
Keys and defaults:
  seed (0), out_dir ("."), threads (0 = all cores, or RGDM_THREADS)
  data.path; data.generator{kind: mixture2d|templates, n_samples,
    points_per_cloud (128), centers, sigma (0.2), templates, jitter (0.05),
    seed (0)}; data.split{train, val, test, seed (0)} (optional)
  schedule{kind: linear|cosine (linear), T (100), beta_1 (1e-4),
    beta_T (0.05), s (0.008)}
  model{layer_dims ([2,64,128,64,2])}
  train{batch_size (16), pretrain_steps (0), finetune_steps (0),
    lr_pretrain (1e-3), lr_finetune (2e-4), adam_beta1 (0.9),
    adam_beta2 (0.999), adam_eps (1e-8), reward_clip (5)}
  reward{kind: none|region_indicator|halfplane_margin|neg_chamfer_to_template
    (none), solver: none|gradient|annealing (none), kappa (2), radius (0 =
    use kappa*sqrt(post_var[t])), normal, offset (0), box_lo, box_hi,
    template_path, gradient_steps (50), gradient_step_scale (0.1),
    annealing_proposals (500), annealing_sigma_scale (0.2),
    annealing_tau_hi (1), annealing_tau_lo (0.01), seed (0)}
  sampling{n_samples (64), n_points (0 = checkpoint value), seed (0)}
  eval{grid_res (32), target_label (-1 = all)}
Exit codes: 0 ok, 1 I/O, 2 config/input, 3 training failure,
4 checkpoint error, 5 metric precondition.)";

// Entry point shared by the binary and the tests. args excludes argv[0].
inline int run(std::vector<std::string> args) {
    CLI::App app{"rgdm: reward-guided point-cloud diffusion at desk scale"};
    app.footer(kConfigHelp);
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    std::string out_override;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file")->configurable(false);
    app.add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--out", out_override, "override the config out_dir / output directory");
    app.add_option("--threads", threads, "worker threads (default: RGDM_THREADS or all cores)");
    app.fallthrough();

    auto* sub_make = app.add_subcommand("make-data", "generate a synthetic dataset");
    auto* sub_pre = app.add_subcommand("pretrain", "MLE-pretrain a diffusion model");
    auto* sub_fine = app.add_subcommand("finetune", "reward-guided fine-tuning");
    auto* sub_sample = app.add_subcommand("sample", "draw clouds from a checkpoint");
    auto* sub_eval = app.add_subcommand("eval", "compare two dataset directories");

    std::string ckpt_path;
    sub_fine->add_option("--ckpt", ckpt_path, "input checkpoint (default: out_dir/pretrained.ckpt)");

    std::string sample_ckpt;
    int sample_n = -1;
    int sample_points = 0;
    sub_sample->add_option("--ckpt", sample_ckpt, "checkpoint to sample from")->required();
    sub_sample->add_option("--n", sample_n, "number of clouds (default: config or 64)");
    sub_sample->add_option("--points", sample_points, "points per cloud (default: checkpoint)");

    std::string gen_dir, ref_dir;
    int grid_res = 0;
    int target_label = -2;
    sub_eval->add_option("--gen", gen_dir, "generated dataset directory")->required();
    sub_eval->add_option("--ref", ref_dir, "reference dataset directory")->required();
    sub_eval->add_option("--grid-res", grid_res, "JSD grid resolution (default: config or 32)");
    sub_eval->add_option("--target-label", target_label, "restrict reference set to one label");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        // Commands that read a config resolve relative paths against the
        // config file's directory.
        RunConfig cfg;
        fs::path base = ".";
        const bool have_config = !config_path.empty();
        if (have_config) {
            cfg = load_run_config(config_path);
            base = fs::path(config_path).has_parent_path() ? fs::path(config_path).parent_path()
                                                           : fs::path(".");
        }
        if (seed_given) cfg.seed = seed_override;
        if (!out_override.empty()) {
            cfg.out_dir = out_override;
            base = ".";  // explicit --out is relative to the caller, not the config
        }
        if (threads > 0) cfg.threads = threads;

        if (sub_make->parsed()) {
            if (!have_config) throw ConfigError("make-data requires --config");
            return cmd_make_data(cfg, base);
        }
        if (sub_pre->parsed()) {
            if (!have_config) throw ConfigError("pretrain requires --config");
            return cmd_pretrain(cfg, base);
        }
        if (sub_fine->parsed()) {
            if (!have_config) throw ConfigError("finetune requires --config");
            fs::path ckpt = ckpt_path.empty()
                                ? detail::resolve(base, cfg.out_dir) / "pretrained.ckpt"
                                : fs::path(ckpt_path);
            return cmd_finetune(cfg, ckpt, base);
        }
        if (sub_sample->parsed()) {
            const int n = sample_n >= 0 ? sample_n : (have_config ? cfg.sample_n : 64);
            const int pts = sample_points > 0
                                ? sample_points
                                : (have_config && cfg.sample_points > 0 ? cfg.sample_points : 0);
            const std::uint64_t seed = seed_given ? seed_override
                                                  : (have_config ? cfg.sample_seed : 0);
            const fs::path out = !out_override.empty()
                                     ? fs::path(out_override)
                                     : detail::resolve(base, cfg.out_dir) / "samples";
            return cmd_sample(sample_ckpt, n, pts, seed, out, cfg.threads);
        }
        if (sub_eval->parsed()) {
            EvalOptions opt;
            opt.grid_res = grid_res > 0 ? grid_res : (have_config ? cfg.grid_res : 32);
            opt.target_label = target_label >= -1 ? target_label
                                                  : (have_config ? cfg.target_label : -1);
            opt.threads = cfg.threads;
            const fs::path out = !out_override.empty() ? fs::path(out_override)
                                                       : detail::resolve(base, cfg.out_dir);
            return cmd_eval(gen_dir, ref_dir, opt, out);
        }
        throw ConfigError("no subcommand given");
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ManifestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const TrainingFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SolverFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const MetricPrecondition& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace rgdm::cli
