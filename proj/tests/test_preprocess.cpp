#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "petseg/preprocess.hpp"
#include "petseg/rng.hpp"

using namespace petseg;

namespace {

Geometry geo(Index3 dims, Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0}) {
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    g.origin = origin;
    return g;
}

} // namespace

TEST_CASE("world_from_index closed forms") {
    SUBCASE("identity mapping") {
        const Vec3 w = world_from_index(geo({8, 8, 8}), {3, 4, 5});
        CHECK(w[0] == doctest::Approx(3.0));
        CHECK(w[1] == doctest::Approx(4.0));
        CHECK(w[2] == doctest::Approx(5.0));
    }
    SUBCASE("origin and spacing") {
        const Vec3 w = world_from_index(geo({8, 8, 8}, {2, 1, 1}, {10, 0, 0}), {3, 0, 0});
        CHECK(w[0] == doctest::Approx(16.0));
    }
    SUBCASE("index origin maps to world origin") {
        const Vec3 w = world_from_index(geo({8, 8, 8}, {2, 3, 4}, {-7, 2, 9}), {0, 0, 0});
        CHECK(w[0] == doctest::Approx(-7.0));
        CHECK(w[1] == doctest::Approx(2.0));
        CHECK(w[2] == doctest::Approx(9.0));
    }
    SUBCASE("index_from_world inverts, with rotation") {
        Geometry g = geo({8, 8, 8}, {2, 3, 4}, {5, -1, 2});
        g.direction = {{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}; // 90 deg about z
        g.validate();
        const Vec3 ijk{1.5, 2.25, 3.0};
        const Vec3 back = index_from_world(g, world_from_index(g, ijk));
        for (int a = 0; a < 3; ++a) CHECK(back[a] == doctest::Approx(ijk[a]).epsilon(1e-12));
    }
}

TEST_CASE("identity resample is exact") {
    Rng rng(7);
    Volume3D src(geo({5, 4, 3}, {1.5, 2.0, 1.0}, {3, 2, 1}), 0.0);
    for (auto& v : src.data) v = rng.uniform(-100, 100);
    const Volume3D out = resample_to_grid(src, src.geometry, InterpolationMode::trilinear, -1);
    for (std::size_t v = 0; v < src.data.size(); ++v)
        CHECK(out.data[v] == doctest::Approx(src.data[v]).epsilon(1e-12));
}

TEST_CASE("constant volumes stay constant inside the source extent") {
    Volume3D src(geo({8, 8, 8}, {2, 2, 2}), 100.0);
    Geometry target = geo({6, 6, 6}, {1.5, 1.5, 1.5}, {1.0, 1.0, 1.0});
    const Volume3D out = resample_to_grid(src, target, InterpolationMode::trilinear, -1);
    for (double v : out.data) CHECK(v == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("ramp sampled at half-voxel offsets hits midpoints") {
    Volume3D src(geo({8, 4, 4}), 0.0);
    for (std::int64_t k = 0; k < 4; ++k)
        for (std::int64_t j = 0; j < 4; ++j)
            for (std::int64_t i = 0; i < 8; ++i) src.at(i, j, k) = double(i);

    Geometry target = geo({7, 4, 4}, {1, 1, 1}, {0.5, 0, 0});
    const Volume3D out = resample_to_grid(src, target, InterpolationMode::trilinear, -1);
    for (std::int64_t i = 0; i < 7; ++i)
        CHECK(out.at(i, 1, 1) == doctest::Approx(double(i) + 0.5).epsilon(1e-9));
}

TEST_CASE("positions outside the support take the fill value") {
    Volume3D src(geo({4, 4, 4}), 5.0);
    Geometry target = geo({4, 4, 4}, {1, 1, 1}, {100, 0, 0});
    const Volume3D out = resample_to_grid(src, target, InterpolationMode::trilinear, -9.5);
    for (double v : out.data) CHECK(v == -9.5);
}

TEST_CASE("nearest resampling emits only source values") {
    Rng rng(3);
    Volume3D src(geo({6, 6, 6}), 0.0);
    for (auto& v : src.data) v = double(rng.next_below(3)); // values {0,1,2}

    Geometry target = geo({9, 9, 9}, {0.7, 0.7, 0.7}, {-0.4, -0.4, -0.4});
    const Volume3D out = resample_to_grid(src, target, InterpolationMode::nearest, 255);
    const std::set<double> allowed{0.0, 1.0, 2.0, 255.0};
    for (double v : out.data) CHECK(allowed.count(v) == 1);
}

TEST_CASE("nearest label resampling commutes with relabeling") {
    Rng rng(11);
    LabelMap src(geo({6, 6, 6}), std::uint8_t{0});
    for (auto& v : src.labels) v = std::uint8_t(rng.next_below(4));
    Geometry target = geo({5, 7, 6}, {1.2, 0.8, 1.0}, {0.3, -0.2, 0.1});

    const auto relabel = [](std::uint8_t v) { return std::uint8_t(7 - v); }; // bijection on 0..4
    LabelMap relabeled = src;
    for (auto& v : relabeled.labels) v = relabel(v);

    const LabelMap a = resample_labels_to_grid(src, target, 0);
    const LabelMap b = resample_labels_to_grid(relabeled, target, relabel(0));
    for (std::size_t v = 0; v < a.labels.size(); ++v) CHECK(relabel(a.labels[v]) == b.labels[v]);
}

TEST_CASE("trilinear output is bounded by the source range and fill") {
    Rng rng(19);
    Volume3D src(geo({6, 6, 6}), 0.0);
    double lo = 1e300, hi = -1e300;
    for (auto& v : src.data) {
        v = rng.uniform(-50, 50);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double fill = -77.0;
    Geometry target = geo({9, 9, 9}, {0.9, 0.9, 0.9}, {-1, -1, -1});
    const Volume3D out = resample_to_grid(src, target, InterpolationMode::trilinear, fill);
    for (double v : out.data) {
        const bool in_range = v >= lo - 1e-9 && v <= hi + 1e-9;
        CHECK((in_range || v == fill));
    }
}

TEST_CASE("normalize_ct") {
    SUBCASE("constant volume becomes all zeros") {
        Volume3D vol(geo({4, 4, 4}), 123.0);
        const Volume3D out = normalize_ct(vol, {});
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("clipping happens before the z-score") {
        Volume3D vol(geo({2, 1, 1}), 0.0);
        vol.data = {-2000.0, -1024.0};
        NormalizationSpec spec;
        const Volume3D out = normalize_ct(vol, spec);
        // both clip to -1024 -> degenerate std -> zeros
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("two-voxel volume normalizes to -1 and 1 with population std") {
        Volume3D vol(geo({2, 1, 1}), 0.0);
        vol.data = {-1.0, 1.0};
        const Volume3D out = normalize_ct(vol, {});
        CHECK(out.data[0] == doctest::Approx(-1.0));
        CHECK(out.data[1] == doctest::Approx(1.0));
    }
    SUBCASE("mean 0 and std 1 when no clipping occurs") {
        Rng rng(5);
        Volume3D vol(geo({8, 8, 8}), 0.0);
        for (auto& v : vol.data) v = rng.uniform(-500, 500);
        const Volume3D out = normalize_ct(vol, {});
        double mean = 0;
        for (double v : out.data) mean += v;
        mean /= double(out.data.size());
        double var = 0;
        for (double v : out.data) var += (v - mean) * (v - mean);
        var /= double(out.data.size());
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(std::fabs(std::sqrt(var) - 1.0) < 1e-9);
    }
    SUBCASE("mode none only clips") {
        Volume3D vol(geo({2, 1, 1}), 0.0);
        vol.data = {-5000.0, 100.0};
        NormalizationSpec spec;
        spec.mode = NormalizationSpec::Mode::none;
        const Volume3D out = normalize_ct(vol, spec);
        CHECK(out.data[0] == -1024.0);
        CHECK(out.data[1] == 100.0);
    }
}

TEST_CASE("extract_patch") {
    Volume3D vol(geo({2, 2, 2}, {1, 1, 1}, {5, 5, 5}), 0.0);
    for (std::size_t v = 0; v < 8; ++v) vol.data[v] = double(v + 1);

    SUBCASE("full volume patch is the identity") {
        const Volume3D out = extract_patch(vol, {0, 0, 0}, {2, 2, 2}, -1);
        CHECK(out.data == vol.data);
        CHECK(out.geometry.origin[0] == doctest::Approx(5.0));
    }
    SUBCASE("corner beyond the volume is all padding") {
        const Volume3D out = extract_patch(vol, {10, 10, 10}, {2, 2, 2}, -3);
        for (double v : out.data) CHECK(v == -3.0);
    }
    SUBCASE("negative corner pads the first slab") {
        const Volume3D out = extract_patch(vol, {-1, 0, 0}, {3, 2, 2}, 0);
        for (std::int64_t k = 0; k < 2; ++k)
            for (std::int64_t j = 0; j < 2; ++j) {
                CHECK(out.at(0, j, k) == 0.0);
                CHECK(out.at(1, j, k) == vol.at(0, j, k));
                CHECK(out.at(2, j, k) == vol.at(1, j, k));
            }
        // geometry translated: patch voxel (0,0,0) sits at source index -1
        CHECK(out.geometry.origin[0] == doctest::Approx(4.0));
    }
    SUBCASE("label patches") {
        LabelMap labels(geo({2, 2, 2}), std::uint8_t{0});
        labels.at(1, 1, 1) = 4;
        const LabelMap out = extract_label_patch(labels, {1, 1, 1}, {2, 2, 2}, 0);
        CHECK(out.at(0, 0, 0) == 4);
        CHECK(out.foreground_count() == 1);
    }
}
