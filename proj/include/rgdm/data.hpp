#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "rgdm/error.hpp"
#include "rgdm/point_cloud.hpp"
#include "rgdm/rng.hpp"

namespace rgdm {

struct Dataset {
    int dim = 2;
    CloudSet clouds;
    std::vector<int> labels;  // parallel to clouds; -1 marks unlabeled
    nlohmann::json generator = nlohmann::json();

    std::size_t size() const { return clouds.size(); }
};

// Gaussian blobs: each sample picks one center uniformly (the label) and
// draws its points i.i.d. around it.
inline Dataset gen_mixture2d(int n_samples, int points_per_cloud,
                             const std::vector<std::array<double, 2>>& centers, double sigma,
                             std::uint64_t seed) {
    if (centers.empty()) throw InvalidArgument("gen_mixture2d: need >= 1 center");
    if (!(sigma > 0.0)) throw InvalidArgument("gen_mixture2d: sigma must be > 0");
    if (n_samples < 1 || points_per_cloud < 1)
        throw InvalidArgument("gen_mixture2d: counts must be >= 1");
    Dataset ds;
    ds.dim = 2;
    Rng root(seed, 0x6d697832u /* "mix2" */);
    for (int s = 0; s < n_samples; ++s) {
        Rng rng = root.fork(static_cast<std::uint64_t>(s));
        const int label = static_cast<int>(rng.uniform_index(centers.size()));
        PointCloud c(points_per_cloud, 2);
        for (int i = 0; i < points_per_cloud; ++i) {
            c.at(i, 0) = centers[label][0] + sigma * rng.normal();
            c.at(i, 1) = centers[label][1] + sigma * rng.normal();
        }
        ds.clouds.push_back(std::move(c));
        ds.labels.push_back(label);
    }
    ds.generator = {{"kind", "mixture2d"},
                    {"n_samples", n_samples},
                    {"points_per_cloud", points_per_cloud},
                    {"sigma", sigma},
                    {"seed", seed}};
    return ds;
}

enum class TemplateShape { ring, two_bar, cross };

inline TemplateShape template_from_string(const std::string& s) {
    if (s == "ring") return TemplateShape::ring;
    if (s == "two-bar") return TemplateShape::two_bar;
    if (s == "cross") return TemplateShape::cross;
    throw InvalidArgument("unknown template shape '" + s + "'");
}

namespace detail {

// Uniform-by-arc-length point on the template locus, u in [0,1).
inline std::array<double, 2> template_point(TemplateShape shape, double u) {
    switch (shape) {
        case TemplateShape::ring: {
            const double a = 2.0 * M_PI * u;
            return {std::cos(a), std::sin(a)};
        }
        case TemplateShape::two_bar: {
            const double s = 4.0 * u;
            return s < 2.0 ? std::array<double, 2>{-1.0 + s, 0.5}
                           : std::array<double, 2>{-1.0 + (s - 2.0), -0.5};
        }
        default: {  // cross
            const double s = 4.0 * u;
            return s < 2.0 ? std::array<double, 2>{-1.0 + s, 0.0}
                           : std::array<double, 2>{0.0, -1.0 + (s - 2.0)};
        }
    }
}

}  // namespace detail

inline Dataset gen_template_shapes(int n_samples, int points_per_cloud,
                                   const std::vector<TemplateShape>& templates, double jitter,
                                   std::uint64_t seed) {
    if (templates.empty()) throw InvalidArgument("gen_template_shapes: need >= 1 template");
    if (jitter < 0.0) throw InvalidArgument("gen_template_shapes: jitter must be >= 0");
    if (n_samples < 1 || points_per_cloud < 1)
        throw InvalidArgument("gen_template_shapes: counts must be >= 1");
    Dataset ds;
    ds.dim = 2;
    Rng root(seed, 0x746d706cu /* "tmpl" */);
    for (int s = 0; s < n_samples; ++s) {
        Rng rng = root.fork(static_cast<std::uint64_t>(s));
        const int label = static_cast<int>(rng.uniform_index(templates.size()));
        PointCloud c(points_per_cloud, 2);
        for (int i = 0; i < points_per_cloud; ++i) {
            const auto p = detail::template_point(templates[label], rng.uniform());
            c.at(i, 0) = p[0] + jitter * rng.normal();
            c.at(i, 1) = p[1] + jitter * rng.normal();
        }
        ds.clouds.push_back(std::move(c));
        ds.labels.push_back(label);
    }
    ds.generator = {{"kind", "templates"},
                    {"n_samples", n_samples},
                    {"points_per_cloud", points_per_cloud},
                    {"jitter", jitter},
                    {"seed", seed}};
    return ds;
}

// Per-label stratified shuffle split. Deterministic per seed; the three parts
// partition the input.
inline std::tuple<Dataset, Dataset, Dataset> split(const Dataset& ds, double r_train, double r_val,
                                                   double r_test, std::uint64_t seed) {
    if (r_train < 0.0 || r_val < 0.0 || r_test < 0.0 ||
        std::abs(r_train + r_val + r_test - 1.0) > 1e-9)
        throw InvalidArgument("split: ratios must be >= 0 and sum to 1");
    int max_label = -1;
    for (int l : ds.labels) max_label = std::max(max_label, l);

    std::vector<int> part(ds.size(), 0);
    Rng root(seed, 0x73706c74u /* "splt" */);
    for (int label = -1; label <= max_label; ++label) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (ds.labels[i] == label) idx.push_back(i);
        if (idx.empty()) continue;
        Rng rng = root.fork(static_cast<std::uint64_t>(label + 1));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        const auto n = static_cast<long long>(idx.size());
        const long long n_train = std::llround(r_train * n);
        const long long n_val = std::llround((r_train + r_val) * n) - n_train;
        for (long long i = 0; i < n; ++i)
            part[idx[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
    }

    std::array<Dataset, 3> out;
    for (auto& d : out) {
        d.dim = ds.dim;
        d.generator = ds.generator;
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[part[i]].clouds.push_back(ds.clouds[i]);
        out[part[i]].labels.push_back(ds.labels[i]);
    }
    return {std::move(out[0]), std::move(out[1]), std::move(out[2])};
}

namespace detail {

// 17 significant digits: exact round-trip for 64-bit floats.
inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string sample_filename(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%06zu.txt", i);
    return buf;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("save_dataset: cannot create '" + dir.string() + "': " + ec.message());

    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto name = detail::sample_filename(i);
        std::ofstream f(dir / name);
        if (!f) throw IoError("save_dataset: cannot open '" + (dir / name).string() + "'");
        const PointCloud& c = ds.clouds[i];
        for (int p = 0; p < c.n; ++p) {
            for (int k = 0; k < c.dim; ++k)
                f << (k ? " " : "") << detail::fmt_coord(c.at(p, k));
            f << '\n';
        }
        if (!f.good()) throw IoError("save_dataset: write failed for '" + name + "'");
        samples.push_back({{"file", name}, {"label", ds.labels[i]}, {"points", c.n}});
    }

    std::vector<int> distinct = ds.labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    nlohmann::json manifest = {{"version", 1},
                               {"dim", ds.dim},
                               {"labels", distinct},
                               {"samples", samples}};
    if (!ds.generator.is_null()) manifest["generator"] = ds.generator;
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw IoError("save_dataset: cannot open manifest in '" + dir.string() + "'");
    mf << manifest.dump(2) << '\n';
    if (!mf.good()) throw IoError("save_dataset: manifest write failed");
}

inline PointCloud load_sample_file(const std::filesystem::path& path, int dim,
                                   int expected_points) {
    std::ifstream f(path);
    if (!f) throw ManifestError("missing sample file '" + path.string() + "'");
    std::vector<double> coords;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int got = 0;
        std::string tok;
        while (ss >> tok) {
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                throw ManifestError(path.filename().string() + ":" + std::to_string(lineno) +
                                    ": bad coordinate '" + tok + "'");
            coords.push_back(v);
            ++got;
        }
        if (got != dim)
            throw ManifestError(path.filename().string() + ":" + std::to_string(lineno) +
                                ": expected " + std::to_string(dim) + " coordinates, got " +
                                std::to_string(got));
    }
    const int n = static_cast<int>(coords.size()) / dim;
    if (n != expected_points)
        throw ManifestError(path.filename().string() + ": expected " +
                            std::to_string(expected_points) + " points, found " +
                            std::to_string(n));
    PointCloud c(n, dim);
    c.xs = std::move(coords);
    return c;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
    const auto mpath = dir / "manifest.json";
    std::ifstream mf(mpath);
    if (!mf) throw IoError("load_dataset: cannot open '" + mpath.string() + "'");
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ManifestError("manifest.json does not parse: " + std::string(e.what()));
    }
    for (const auto& [key, _] : manifest.items())
        if (key != "version" && key != "dim" && key != "labels" && key != "samples" &&
            key != "generator")
            throw ManifestError("manifest.json: unknown key '" + key + "'");
    if (!manifest.contains("version") || !manifest["version"].is_number_integer() ||
        manifest["version"].get<int>() != 1)
        throw ManifestError("manifest.json: missing or unsupported 'version'");
    if (!manifest.contains("dim") || !manifest["dim"].is_number_integer())
        throw ManifestError("manifest.json: missing integer 'dim'");
    if (!manifest.contains("samples") || !manifest["samples"].is_array())
        throw ManifestError("manifest.json: missing array 'samples'");

    Dataset ds;
    ds.dim = manifest["dim"].get<int>();
    if (ds.dim < 1 || ds.dim > 3) throw ManifestError("manifest.json: dim out of range");
    if (manifest.contains("generator")) ds.generator = manifest["generator"];
    for (const auto& entry : manifest["samples"]) {
        if (!entry.is_object() || !entry.contains("file") || !entry.contains("label") ||
            !entry.contains("points"))
            throw ManifestError("manifest.json: sample entries need file/label/points");
        const auto file = entry["file"].get<std::string>();
        ds.clouds.push_back(load_sample_file(dir / file, ds.dim, entry["points"].get<int>()));
        ds.labels.push_back(entry["label"].get<int>());
    }
    return ds;
}

}  // namespace rgdm
