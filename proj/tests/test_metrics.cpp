#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rgdm/metrics.hpp"
#include "rgdm/rng.hpp"

using namespace rgdm;

namespace {

PointCloud random_cloud(int n, int dim, Rng& rng, double scale = 1.0) {
    PointCloud c(n, dim);
    for (auto& v : c.xs) v = scale * rng.normal();
    return c;
}

PointCloud make_cloud(std::initializer_list<std::pair<double, double>> pts) {
    PointCloud c(static_cast<int>(pts.size()), 2);
    int i = 0;
    for (const auto& [x, y] : pts) {
        c.at(i, 0) = x;
        c.at(i, 1) = y;
        ++i;
    }
    return c;
}

}  // namespace

TEST_CASE("normalize_bbox identity and center-scale cases", "[metrics]") {
    const auto ident = make_cloud({{-1, -1}, {1, 1}, {0.3, -0.2}});
    const auto out = normalize_bbox(ident);
    for (std::size_t i = 0; i < ident.xs.size(); ++i)
        REQUIRE(out.xs[i] == Catch::Approx(ident.xs[i]).margin(1e-15));

    const auto segment = normalize_bbox(make_cloud({{0, 0}, {2, 0}}));
    CHECK(segment.at(0, 0) == -1.0);
    CHECK(segment.at(1, 0) == 1.0);
    CHECK(segment.at(0, 1) == 0.0);
    CHECK(segment.at(1, 1) == 0.0);
}

TEST_CASE("normalize_bbox hits the box exactly and preserves aspect", "[metrics]") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        const auto x = random_cloud(20, 2, rng, 4.0);
        const auto y = normalize_bbox(x);
        double max_abs = 0.0;
        for (double v : y.xs) max_abs = std::max(max_abs, std::abs(v));
        REQUIRE(max_abs == 1.0);
        for (double v : y.xs) REQUIRE(std::abs(v) <= 1.0);

        // aspect: extent ratios survive the shared scale
        auto extent = [](const PointCloud& c, int k) {
            double mn = c.at(0, k), mx = c.at(0, k);
            for (int i = 1; i < c.n; ++i) {
                mn = std::min(mn, c.at(i, k));
                mx = std::max(mx, c.at(i, k));
            }
            return mx - mn;
        };
        const double before = extent(x, 0) / extent(x, 1);
        const double after = extent(y, 0) / extent(y, 1);
        REQUIRE(after == Catch::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("normalize_bbox rejects degenerate clouds", "[metrics]") {
    PointCloud single(1, 2);
    CHECK_THROWS_AS(normalize_bbox(single), MetricPrecondition);
    PointCloud same(3, 2);
    for (int i = 0; i < 3; ++i) {
        same.at(i, 0) = 0.7;
        same.at(i, 1) = -0.2;
    }
    CHECK_THROWS_AS(normalize_bbox(same), MetricPrecondition);
}

TEST_CASE("chamfer examples", "[metrics]") {
    const auto a = make_cloud({{0, 0}, {1, 1}});
    CHECK(chamfer(a, a) == 0.0);

    const auto x = make_cloud({{0, 0}});
    const auto y = make_cloud({{1, 0}});
    CHECK(chamfer(x, y) == Catch::Approx(2.0));  // 1 + 1 under the declared convention
}

TEST_CASE("chamfer matches the brute-force oracle and is symmetric", "[metrics]") {
    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        const auto x = random_cloud(2 + static_cast<int>(rng.uniform_index(10)), 2, rng);
        const auto y = random_cloud(2 + static_cast<int>(rng.uniform_index(10)), 2, rng);
        REQUIRE(chamfer(x, y) == Catch::Approx(oracle::chamfer_brute(x, y)).margin(1e-12));
        REQUIRE(chamfer(x, y) == chamfer(y, x));
        REQUIRE(chamfer(x, y) >= 0.0);
    }
}

TEST_CASE("emd examples", "[metrics]") {
    const auto a = make_cloud({{0, 0}, {1, 1}});
    CHECK(emd(a, a) == Catch::Approx(0.0).margin(1e-15));

    const auto x = make_cloud({{0, 0}, {1, 0}});
    const auto y = make_cloud({{0, 1}, {1, 1}});
    CHECK(emd(x, y) == Catch::Approx(1.0));
}

TEST_CASE("emd equals the exhaustive permutation minimum", "[metrics]") {
    Rng rng(11);
    for (int n : {2, 3, 5, 8}) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto x = random_cloud(n, 2, rng);
            const auto y = random_cloud(n, 2, rng);
            REQUIRE(emd(x, y) == Catch::Approx(oracle::emd_brute(x, y)).margin(1e-9));
            REQUIRE(emd(x, y) == Catch::Approx(emd(y, x)).margin(1e-12));
        }
    }
}

TEST_CASE("emd rejects unequal sizes", "[metrics]") {
    Rng rng(13);
    const auto x = random_cloud(3, 2, rng);
    const auto y = random_cloud(4, 2, rng);
    CHECK_THROWS_AS(emd(x, y), MetricPrecondition);
}

TEST_CASE("mmd examples and brute-force agreement", "[metrics]") {
    Rng rng(17);
    const auto a = random_cloud(4, 2, rng);
    const auto b = random_cloud(4, 2, rng);
    CHECK(mmd({a, b}, {a, b}, CloudDistance::cd) == Catch::Approx(0.0).margin(1e-15));
    CHECK(mmd({a}, {a, b}, CloudDistance::cd) == Catch::Approx(chamfer(a, b) / 2).epsilon(1e-13));

    for (int rep = 0; rep < 5; ++rep) {
        CloudSet gen, ref;
        for (int i = 0; i < 4; ++i) gen.push_back(random_cloud(5, 2, rng));
        for (int i = 0; i < 6; ++i) ref.push_back(random_cloud(5, 2, rng));
        const auto cd = [](const PointCloud& x, const PointCloud& y) { return chamfer(x, y); };
        const auto ed = [](const PointCloud& x, const PointCloud& y) { return emd(x, y); };
        REQUIRE(mmd(gen, ref, CloudDistance::cd) ==
                Catch::Approx(oracle::mmd_brute(gen, ref, cd)).margin(1e-12));
        REQUIRE(mmd(gen, ref, CloudDistance::emd) ==
                Catch::Approx(oracle::mmd_brute(gen, ref, ed)).margin(1e-12));
    }
}

TEST_CASE("cov examples and brute-force agreement", "[metrics]") {
    Rng rng(19);
    const auto a = random_cloud(4, 2, rng);
    const auto b = random_cloud(4, 2, rng);
    CHECK(cov({a, b}, {a, b}, CloudDistance::cd) == 1.0);
    CHECK(cov({a}, {a, b}, CloudDistance::cd) == 0.5);

    for (int rep = 0; rep < 5; ++rep) {
        CloudSet gen, ref;
        for (int i = 0; i < 5; ++i) gen.push_back(random_cloud(4, 2, rng));
        for (int i = 0; i < 4; ++i) ref.push_back(random_cloud(4, 2, rng));
        const auto cd = [](const PointCloud& x, const PointCloud& y) { return chamfer(x, y); };
        REQUIRE(cov(gen, ref, CloudDistance::cd) ==
                Catch::Approx(oracle::cov_brute(gen, ref, cd)).margin(1e-15));
    }
}

TEST_CASE("jsd trivial and maximal cases", "[metrics]") {
    const auto a = make_cloud({{-0.5, -0.5}, {0.5, 0.5}});
    const auto b = make_cloud({{0.5, 0.5}, {-0.5, -0.5}});
    CHECK(jsd({a}, {b}, 4) == Catch::Approx(0.0).margin(1e-15));

    const auto left = make_cloud({{-0.9, 0.0}, {-0.8, 0.1}});
    const auto right = make_cloud({{0.9, 0.0}, {0.8, 0.1}});
    CHECK(jsd({left}, {right}, 4) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("jsd matches the interval-membership histogram oracle", "[metrics]") {
    Rng rng(23);
    for (int rep = 0; rep < 5; ++rep) {
        CloudSet gen, ref;
        for (int i = 0; i < 3; ++i) gen.push_back(random_cloud(20, 2, rng, 0.45));
        for (int i = 0; i < 4; ++i) ref.push_back(random_cloud(15, 2, rng, 0.45));
        const double got = jsd(gen, ref, 4);
        REQUIRE(got == Catch::Approx(oracle::jsd_brute(gen, ref, 4)).margin(1e-12));
        REQUIRE(got == Catch::Approx(jsd(ref, gen, 4)).margin(1e-15));
        REQUIRE(got >= 0.0);
        REQUIRE(got <= std::log(2.0) + 1e-12);
    }
}

TEST_CASE("jsd boundary points land in the lower-index cell", "[metrics]") {
    // 0.0 sits on the cell edge for res = 4; lower cell covers (-0.5, 0].
    const auto edge = make_cloud({{0.0, 0.0}});
    const auto low = make_cloud({{-0.25, -0.25}});   // same cell if boundary goes down
    const auto high = make_cloud({{0.25, 0.25}});
    CHECK(jsd({edge}, {low}, 4) == Catch::Approx(0.0).margin(1e-15));
    CHECK(jsd({edge}, {high}, 4) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("metric preconditions on empty and mismatched sets", "[metrics]") {
    Rng rng(29);
    const auto a = random_cloud(4, 2, rng);
    CHECK_THROWS_AS(mmd({}, {a}, CloudDistance::cd), MetricPrecondition);
    CHECK_THROWS_AS(cov({a}, {}, CloudDistance::cd), MetricPrecondition);
    CHECK_THROWS_AS(jsd({}, {a}, 4), MetricPrecondition);
    CHECK_THROWS_AS(jsd({a}, {a}, 1), MetricPrecondition);
    const auto b3 = random_cloud(4, 3, rng);
    CHECK_THROWS_AS(chamfer(a, b3), MetricPrecondition);
}

TEST_CASE("pairwise distances are thread-count independent", "[metrics]") {
    Rng rng(31);
    CloudSet gen, ref;
    for (int i = 0; i < 6; ++i) gen.push_back(random_cloud(8, 2, rng));
    for (int i = 0; i < 5; ++i) ref.push_back(random_cloud(8, 2, rng));
    const auto serial = pairwise_distances(gen, ref, CloudDistance::cd, 1);
    const auto parallel = pairwise_distances(gen, ref, CloudDistance::cd, 4);
    REQUIRE(serial == parallel);
}
