#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgdm/data.hpp"
#include "rgdm/error.hpp"
#include "rgdm/reward.hpp"
#include "rgdm/train.hpp"

namespace rgdm {

namespace detail {

using nlohmann::json;

// Unknown keys are errors: a typo'd key must not silently become a default.
inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
    if (!j.is_object()) throw ConfigError("config: '" + ctx + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("config: unknown key '" + key + "' in '" + ctx + "'");
    }
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key)) throw ConfigError("config: missing required key '" + ctx + "." + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value type for '" + ctx + "." + key + "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value type for '" + ctx + "." + key + "'");
    }
}

}  // namespace detail

struct GeneratorConfig {
    std::string kind;  // mixture2d | templates
    int n_samples = 0;
    int points_per_cloud = 128;
    std::vector<std::array<double, 2>> centers;
    double sigma = 0.2;
    std::vector<TemplateShape> templates;
    double jitter = 0.05;
    std::uint64_t seed = 0;
    bool present = false;

    Dataset generate() const {
        if (kind == "mixture2d")
            return gen_mixture2d(n_samples, points_per_cloud, centers, sigma, seed);
        if (kind == "templates")
            return gen_template_shapes(n_samples, points_per_cloud, templates, jitter, seed);
        throw ConfigError("config: unknown value '" + kind + "' for 'data.generator.kind'");
    }
};

struct SplitConfig {
    double train = 0.9, val = 0.05, test = 0.05;
    std::uint64_t seed = 0;
    bool present = false;
};

struct RewardConfig {
    std::string kind = "none";  // none | region_indicator | halfplane_margin |
                                // neg_chamfer_to_template
    std::string solver = "none";
    double kappa = 2.0;
    double radius = 0.0;
    std::vector<double> normal;
    double offset = 0.0;
    std::vector<double> box_lo, box_hi;
    std::string template_path;
    GradientSolverConfig gradient_cfg;
    AnnealingSolverConfig annealing_cfg;
    std::uint64_t seed = 0;

    // The template reward needs disk access, hence the base-dir argument.
    RewardSpec build(const std::filesystem::path& base_dir) const {
        RewardSpec spec;
        if (kind == "none") {
            // no reward callable; payoff_sample degenerates to the posterior draw
        } else if (kind == "region_indicator") {
            auto fn = region_indicator_reward(box_lo, box_hi);
            spec.reward = fn.value;
        } else if (kind == "halfplane_margin") {
            auto fn = halfplane_margin_reward(normal, offset);
            spec.reward = fn.value;
            spec.grad = fn.grad;
        } else if (kind == "neg_chamfer_to_template") {
            const Dataset tmpl = load_dataset(base_dir / template_path);
            if (tmpl.clouds.empty())
                throw ConfigError("config: reward.template_path names an empty dataset");
            auto fn = neg_chamfer_reward(tmpl.clouds.front());
            spec.reward = fn.value;
            spec.grad = fn.grad;
        } else {
            throw ConfigError("config: unknown value '" + kind + "' for 'reward.kind'");
        }

        if (solver == "none") spec.solver = ShiftSolver::none;
        else if (solver == "gradient") spec.solver = ShiftSolver::gradient;
        else if (solver == "annealing") spec.solver = ShiftSolver::annealing;
        else throw ConfigError("config: unknown value '" + solver + "' for 'reward.solver'");

        spec.kappa = kappa;
        spec.radius = radius;
        spec.gradient_cfg = gradient_cfg;
        spec.annealing_cfg = annealing_cfg;
        spec.seed = seed;
        spec.validate();
        return spec;
    }
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int threads = 0;

    std::string data_path;
    GeneratorConfig generator;
    SplitConfig split_cfg;

    ScheduleSpec schedule;
    std::vector<int> layer_dims = {2, 64, 128, 64, 2};

    int batch_size = 16;
    long long pretrain_steps = 0;
    long long finetune_steps = 0;
    double lr_pretrain = 1e-3;
    double lr_finetune = 2e-4;
    AdamConfig adam;
    double reward_clip = 5.0;

    RewardConfig reward;

    int sample_n = 64;
    int sample_points = 0;  // 0: take the checkpoint's value
    std::uint64_t sample_seed = 0;

    int grid_res = 32;
    int target_label = -1;

    // Pretraining never touches the reward, so it can skip building one
    // (a template reward would otherwise hit the disk for nothing).
    TrainConfig to_train_config(const std::filesystem::path& base_dir, bool with_reward) const {
        TrainConfig cfg;
        cfg.schedule = schedule;
        cfg.layer_dims = layer_dims;
        cfg.batch_size = batch_size;
        cfg.pretrain_steps = pretrain_steps;
        cfg.finetune_steps = finetune_steps;
        cfg.lr_pretrain = lr_pretrain;
        cfg.lr_finetune = lr_finetune;
        cfg.adam = adam;
        cfg.reward_clip = reward_clip;
        if (with_reward) cfg.reward = reward.build(base_dir);
        cfg.seed = seed;
        cfg.threads = threads;
        return cfg;
    }
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::get_field;
    using detail::get_or;

    check_keys(j, {"seed", "out_dir", "threads", "data", "schedule", "model", "train", "reward",
                   "sampling", "eval"},
               "<root>");
    RunConfig cfg;
    cfg.seed = get_or<std::uint64_t>(j, "seed", 0, "<root>");
    cfg.out_dir = get_or<std::string>(j, "out_dir", ".", "<root>");
    cfg.threads = get_or<int>(j, "threads", 0, "<root>");

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, {"path", "generator", "split"}, "data");
        cfg.data_path = get_or<std::string>(d, "path", "", "data");
        if (d.contains("generator")) {
            const auto& g = d.at("generator");
            check_keys(g,
                       {"kind", "n_samples", "points_per_cloud", "centers", "sigma", "templates",
                        "jitter", "seed"},
                       "data.generator");
            auto& gc = cfg.generator;
            gc.present = true;
            gc.kind = get_field<std::string>(g, "kind", "data.generator");
            gc.n_samples = get_field<int>(g, "n_samples", "data.generator");
            gc.points_per_cloud = get_or<int>(g, "points_per_cloud", 128, "data.generator");
            gc.seed = get_or<std::uint64_t>(g, "seed", 0, "data.generator");
            if (gc.kind == "mixture2d") {
                const auto centers = get_field<std::vector<std::vector<double>>>(g, "centers",
                                                                                 "data.generator");
                for (const auto& c : centers) {
                    if (c.size() != 2)
                        throw ConfigError("config: each 'data.generator.centers' entry needs 2 "
                                          "coordinates");
                    gc.centers.push_back({c[0], c[1]});
                }
                gc.sigma = get_or<double>(g, "sigma", 0.2, "data.generator");
            } else if (gc.kind == "templates") {
                for (const auto& name :
                     get_field<std::vector<std::string>>(g, "templates", "data.generator")) {
                    try {
                        gc.templates.push_back(template_from_string(name));
                    } catch (const InvalidArgument& e) {
                        throw ConfigError("config: data.generator.templates: " +
                                          std::string(e.what()));
                    }
                }
                gc.jitter = get_or<double>(g, "jitter", 0.05, "data.generator");
            } else {
                throw ConfigError("config: unknown value '" + gc.kind +
                                  "' for 'data.generator.kind'");
            }
        }
        if (d.contains("split")) {
            const auto& s = d.at("split");
            check_keys(s, {"train", "val", "test", "seed"}, "data.split");
            cfg.split_cfg.present = true;
            cfg.split_cfg.train = get_field<double>(s, "train", "data.split");
            cfg.split_cfg.val = get_field<double>(s, "val", "data.split");
            cfg.split_cfg.test = get_field<double>(s, "test", "data.split");
            cfg.split_cfg.seed = get_or<std::uint64_t>(s, "seed", 0, "data.split");
        }
    }

    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_keys(s, {"kind", "T", "beta_1", "beta_T", "s"}, "schedule");
        const auto kind = get_or<std::string>(s, "kind", "linear", "schedule");
        if (kind == "linear") cfg.schedule.kind = ScheduleKind::linear;
        else if (kind == "cosine") cfg.schedule.kind = ScheduleKind::cosine;
        else throw ConfigError("config: unknown value '" + kind + "' for 'schedule.kind'");
        cfg.schedule.T = get_or<int>(s, "T", 100, "schedule");
        cfg.schedule.beta_1 = get_or<double>(s, "beta_1", 1e-4, "schedule");
        cfg.schedule.beta_T = get_or<double>(s, "beta_T", 0.05, "schedule");
        cfg.schedule.cosine_s = get_or<double>(s, "s", 0.008, "schedule");
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, {"layer_dims"}, "model");
        cfg.layer_dims = get_field<std::vector<int>>(m, "layer_dims", "model");
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t,
                   {"batch_size", "pretrain_steps", "finetune_steps", "lr_pretrain", "lr_finetune",
                    "adam_beta1", "adam_beta2", "adam_eps", "reward_clip"},
                   "train");
        cfg.batch_size = get_or<int>(t, "batch_size", 16, "train");
        cfg.pretrain_steps = get_or<long long>(t, "pretrain_steps", 0, "train");
        cfg.finetune_steps = get_or<long long>(t, "finetune_steps", 0, "train");
        cfg.lr_pretrain = get_or<double>(t, "lr_pretrain", 1e-3, "train");
        cfg.lr_finetune = get_or<double>(t, "lr_finetune", 2e-4, "train");
        cfg.adam.beta1 = get_or<double>(t, "adam_beta1", 0.9, "train");
        cfg.adam.beta2 = get_or<double>(t, "adam_beta2", 0.999, "train");
        cfg.adam.eps = get_or<double>(t, "adam_eps", 1e-8, "train");
        cfg.reward_clip = get_or<double>(t, "reward_clip", 5.0, "train");
    }

    if (j.contains("reward")) {
        const auto& r = j.at("reward");
        check_keys(r,
                   {"kind", "solver", "kappa", "radius", "normal", "offset", "box_lo", "box_hi",
                    "template_path", "gradient_steps", "gradient_step_scale",
                    "annealing_proposals", "annealing_sigma_scale", "annealing_tau_hi",
                    "annealing_tau_lo", "seed"},
                   "reward");
        auto& rc = cfg.reward;
        rc.kind = get_or<std::string>(r, "kind", "none", "reward");
        rc.solver = get_or<std::string>(r, "solver", "none", "reward");
        rc.kappa = get_or<double>(r, "kappa", 2.0, "reward");
        rc.radius = get_or<double>(r, "radius", 0.0, "reward");
        rc.normal = get_or<std::vector<double>>(r, "normal", {}, "reward");
        rc.offset = get_or<double>(r, "offset", 0.0, "reward");
        rc.box_lo = get_or<std::vector<double>>(r, "box_lo", {}, "reward");
        rc.box_hi = get_or<std::vector<double>>(r, "box_hi", {}, "reward");
        rc.template_path = get_or<std::string>(r, "template_path", "", "reward");
        rc.gradient_cfg.steps = get_or<int>(r, "gradient_steps", 50, "reward");
        rc.gradient_cfg.step_scale = get_or<double>(r, "gradient_step_scale", 0.1, "reward");
        rc.annealing_cfg.proposals = get_or<int>(r, "annealing_proposals", 500, "reward");
        rc.annealing_cfg.sigma_scale = get_or<double>(r, "annealing_sigma_scale", 0.2, "reward");
        rc.annealing_cfg.tau_hi = get_or<double>(r, "annealing_tau_hi", 1.0, "reward");
        rc.annealing_cfg.tau_lo = get_or<double>(r, "annealing_tau_lo", 0.01, "reward");
        rc.seed = get_or<std::uint64_t>(r, "seed", 0, "reward");
    }

    if (j.contains("sampling")) {
        const auto& s = j.at("sampling");
        check_keys(s, {"n_samples", "n_points", "seed"}, "sampling");
        cfg.sample_n = get_or<int>(s, "n_samples", 64, "sampling");
        cfg.sample_points = get_or<int>(s, "n_points", 0, "sampling");
        cfg.sample_seed = get_or<std::uint64_t>(s, "seed", 0, "sampling");
    }

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, {"grid_res", "target_label"}, "eval");
        cfg.grid_res = get_or<int>(e, "grid_res", 32, "eval");
        cfg.target_label = get_or<int>(e, "target_label", -1, "eval");
    }

    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config '" + path.string() + "' does not parse: " + e.what());
    }
    return parse_run_config(j);
}

}  // namespace rgdm
