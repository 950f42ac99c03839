#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "petseg/ensemble.hpp"
#include "petseg/rng.hpp"
#include "tempdir.hpp"

using namespace petseg;

namespace {

Geometry geo(Index3 dims, Vec3 spacing = {1, 1, 1}) {
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    return g;
}

ProbabilityVolume random_probs(const Geometry& g, int classes, Rng& rng) {
    ProbabilityVolume pv;
    pv.geometry = g;
    pv.classes = classes;
    pv.probs.resize(std::size_t(classes) * std::size_t(g.voxel_count()));
    for (std::int64_t v = 0; v < g.voxel_count(); ++v) {
        double sum = 0;
        std::vector<double> raw(static_cast<std::size_t>(classes), 0.0);
        for (auto& r : raw) {
            r = rng.uniform(0.01, 1.0);
            sum += r;
        }
        for (int c = 0; c < classes; ++c) pv.at(c, v) = raw[std::size_t(c)] / sum;
    }
    return pv;
}

} // namespace

TEST_CASE("mean of identical maps is that map; permutations don't matter") {
    Rng rng(1);
    const Geometry g = geo({4, 4, 4});
    const ProbabilityVolume a = random_probs(g, 3, rng);
    const ProbabilityVolume b = random_probs(g, 3, rng);
    const ProbabilityVolume c = random_probs(g, 3, rng);

    const auto same = average_probabilities({a, a, a});
    for (std::size_t v = 0; v < a.probs.size(); ++v)
        CHECK(same.probs[v] == doctest::Approx(a.probs[v]).epsilon(1e-12));

    const auto abc = average_probabilities({a, b, c});
    const auto cab = average_probabilities({c, a, b});
    for (std::size_t v = 0; v < abc.probs.size(); ++v)
        CHECK(abc.probs[v] == doctest::Approx(cab.probs[v]).epsilon(1e-12));
    abc.validate();
}

TEST_CASE("two one-hot maps average to 0.5/0.5") {
    const Geometry g = geo({1, 1, 1});
    ProbabilityVolume a, b;
    a.geometry = b.geometry = g;
    a.classes = b.classes = 2;
    a.probs = {1.0, 0.0};
    b.probs = {0.0, 1.0};
    const auto mean = average_probabilities({a, b});
    CHECK(mean.at(0, 0) == doctest::Approx(0.5));
    CHECK(mean.at(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("average_probabilities rejects mismatched inputs") {
    Rng rng(2);
    const auto a = random_probs(geo({2, 2, 2}), 3, rng);
    const auto b = random_probs(geo({2, 2, 3}), 3, rng);
    const auto c = random_probs(geo({2, 2, 2}), 4, rng);
    CHECK_THROWS_AS(average_probabilities({}), EmptyInputError);
    CHECK_THROWS_AS(average_probabilities({a, b}), ShapeError);
    CHECK_THROWS_AS(average_probabilities({a, c}), ShapeError);
}

TEST_CASE("argmax labels") {
    const Geometry g = geo({1, 1, 3});
    ProbabilityVolume pv;
    pv.geometry = g;
    pv.classes = 3;
    // voxel 0: one-hot class 2; voxel 1: uniform; voxel 2: (0.2, 0.5, 0.3)
    pv.probs = {0.0, 1.0 / 3, 0.2, /* class 0 */
                0.0, 1.0 / 3, 0.5, /* class 1 */
                1.0, 1.0 / 3, 0.3 /* class 2 */};
    const LabelMap labels = argmax_labels(pv);
    CHECK(labels.labels[0] == 2);
    CHECK(labels.labels[1] == 0); // ties break to the lowest class
    CHECK(labels.labels[2] == 1);
}

TEST_CASE("argmax is invariant under shared rescale + renormalize") {
    Rng rng(5);
    const Geometry g = geo({4, 4, 4});
    const auto a = random_probs(g, 4, rng);
    ProbabilityVolume scaled = a; // scaling all classes by c>0 then renormalizing is a no-op
    for (auto& p : scaled.probs) p = p * 3.75;
    for (std::int64_t v = 0; v < g.voxel_count(); ++v) {
        double sum = 0;
        for (int c = 0; c < 4; ++c) sum += scaled.at(c, v);
        for (int c = 0; c < 4; ++c) scaled.at(c, v) /= sum;
    }
    CHECK(argmax_labels(a).labels == argmax_labels(scaled).labels);
}

TEST_CASE("ensembling K identical maps then argmax equals argmax of one") {
    Rng rng(9);
    const auto a = random_probs(geo({5, 4, 3}), 3, rng);
    const auto mean = average_probabilities({a, a, a, a, a});
    CHECK(argmax_labels(mean).labels == argmax_labels(a).labels);
}

TEST_CASE("majority vote ties break to the lowest class id") {
    const Geometry g = geo({1, 1, 1});
    ProbabilityVolume c0, c1;
    c0.geometry = c1.geometry = g;
    c0.classes = c1.classes = 3;
    c0.probs = {0.9, 0.05, 0.05};
    c1.probs = {0.05, 0.9, 0.05};
    CHECK(majority_vote_labels({c0, c1}).labels[0] == 0);
    CHECK(majority_vote_labels({c1, c1, c0}).labels[0] == 1);
}

TEST_CASE("probability volumes round-trip through multi-file NIfTI") {
    testsupport::TempDir tmp("ensemble_io");
    Rng rng(12);
    const auto pv = random_probs(geo({4, 3, 2}, {2, 2, 2}), 3, rng);
    write_probability_volume(pv, tmp.file("fold0"), {"background", "lesion", "liver"});

    CHECK(std::filesystem::exists(tmp.file("fold0_class0.nii.gz")));
    CHECK(std::filesystem::exists(tmp.file("fold0_class2.nii.gz")));

    const auto back = read_probability_volume(tmp.file("fold0_probs.json"));
    CHECK(back.classes == 3);
    for (std::size_t v = 0; v < pv.probs.size(); ++v)
        CHECK(back.probs[v] == doctest::Approx(pv.probs[v]).epsilon(1e-6)); // float32 on disk

    CHECK_THROWS_AS(read_probability_volume(tmp.file("nope.json")), IoError);
}

TEST_CASE("validate rejects broken simplexes") {
    ProbabilityVolume pv;
    pv.geometry = geo({1, 1, 1});
    pv.classes = 2;
    pv.probs = {0.7, 0.5};
    CHECK_THROWS_AS(pv.validate(), ValidationError);
    pv.probs = {-0.1, 1.1};
    CHECK_THROWS_AS(pv.validate(), ValidationError);
    pv.probs = {0.25, 0.75};
    pv.validate();
}
