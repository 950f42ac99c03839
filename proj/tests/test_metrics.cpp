#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "petseg/metrics.hpp"
#include "petseg/rng.hpp"

using namespace petseg;

namespace {

Geometry geo(Index3 dims, Vec3 spacing = {1, 1, 1}) {
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    return g;
}

LabelMap random_mask(const Geometry& g, Rng& rng, double density) {
    LabelMap m(g, std::uint8_t{0});
    for (auto& v : m.labels) v = rng.next_double() < density ? 1 : 0;
    return m;
}

} // namespace

TEST_CASE("connected components basics") {
    const Geometry g = geo({4, 4, 4});

    SUBCASE("empty mask has no components") {
        const auto cm = connected_components(LabelMap(g, std::uint8_t{0}), Connectivity::twenty_six);
        CHECK(cm.count == 0);
    }
    SUBCASE("single voxel is one component") {
        LabelMap m(g, std::uint8_t{0});
        m.at(2, 2, 2) = 1;
        CHECK(connected_components(m, Connectivity::six).count == 1);
    }
    SUBCASE("corner-touching pair: one component at 26, two at 6") {
        LabelMap m(g, std::uint8_t{0});
        m.at(1, 1, 1) = 1;
        m.at(2, 2, 2) = 1;
        CHECK(connected_components(m, Connectivity::twenty_six).count == 1);
        CHECK(connected_components(m, Connectivity::six).count == 2);
    }
    SUBCASE("edge-touching pair: joined at 18, split at 6") {
        LabelMap m(g, std::uint8_t{0});
        m.at(1, 1, 1) = 1;
        m.at(2, 2, 1) = 1;
        CHECK(connected_components(m, Connectivity::eighteen).count == 1);
        CHECK(connected_components(m, Connectivity::six).count == 2);
    }
    SUBCASE("labels are assigned in ascending first-voxel order") {
        LabelMap m(g, std::uint8_t{0});
        m.at(3, 3, 3) = 1; // later in scan order
        m.at(0, 0, 0) = 1;
        const auto cm = connected_components(m, Connectivity::six);
        CHECK(cm.count == 2);
        CHECK(cm.labels[std::size_t(flat_index(g.dims, 0, 0, 0))] == 1);
        CHECK(cm.labels[std::size_t(flat_index(g.dims, 3, 3, 3))] == 2);
    }
}

TEST_CASE("dice closed forms") {
    const Geometry g = geo({4, 4, 4});
    LabelMap a(g, std::uint8_t{0}), b(g, std::uint8_t{0});

    SUBCASE("both empty -> 1.0") { CHECK(dice(a, b) == 1.0); }
    SUBCASE("identical nonempty -> 1.0") {
        a.at(1, 1, 1) = 1;
        b.at(1, 1, 1) = 1;
        CHECK(dice(a, b) == 1.0);
    }
    SUBCASE("disjoint nonempty -> 0.0") {
        a.at(0, 0, 0) = 1;
        b.at(3, 3, 3) = 1;
        CHECK(dice(a, b) == 0.0);
    }
    SUBCASE("8/8 with 4 shared -> 0.5") {
        for (std::int64_t i = 0; i < 8; ++i) a.labels[std::size_t(i)] = 1;
        for (std::int64_t i = 4; i < 12; ++i) b.labels[std::size_t(i)] = 1;
        CHECK(dice(a, b) == doctest::Approx(0.5));
    }
    SUBCASE("exactly one empty -> 0.0") {
        a.at(1, 1, 1) = 1;
        CHECK(dice(a, b) == 0.0);
    }
}

TEST_CASE("false positive and negative volumes") {
    const Geometry g = geo({6, 6, 6}, {2, 2, 2});
    LabelMap pred(g, std::uint8_t{0}), gt(g, std::uint8_t{0});

    SUBCASE("empty pred -> FPV 0") {
        gt.at(0, 0, 0) = 1;
        CHECK(false_positive_volume(pred, gt, Connectivity::twenty_six) == 0.0);
    }
    SUBCASE("10-voxel unmatched component at 2mm spacing -> 0.08 mL") {
        for (std::int64_t i = 0; i < 5; ++i) {
            pred.at(i, 0, 0) = 1;
            pred.at(i, 1, 0) = 1;
        }
        CHECK(false_positive_volume(pred, gt, Connectivity::twenty_six) == doctest::Approx(0.08));
    }
    SUBCASE("a single overlap voxel exempts the whole component") {
        for (std::int64_t i = 0; i < 6; ++i) pred.at(i, 2, 2) = 1;
        gt.at(5, 2, 2) = 1;
        CHECK(false_positive_volume(pred, gt, Connectivity::twenty_six) == 0.0);
    }
    SUBCASE("FNV mirrors FPV") {
        const Geometry g1 = geo({8, 8, 8});
        LabelMap p(g1, std::uint8_t{0}), t(g1, std::uint8_t{0});
        // gt components of 3 and 5 voxels, pred empty -> (3+5) * 0.001 mL
        for (std::int64_t i = 0; i < 3; ++i) t.at(i, 0, 0) = 1;
        for (std::int64_t i = 0; i < 5; ++i) t.at(i, 4, 4) = 1;
        CHECK(false_negative_volume(p, t, Connectivity::twenty_six) == doctest::Approx(0.008));
        // every gt component touched -> 0
        p.at(0, 0, 0) = 1;
        p.at(0, 4, 4) = 1;
        CHECK(false_negative_volume(p, t, Connectivity::twenty_six) == 0.0);
    }
}

TEST_CASE("surface dice closed forms") {
    const Geometry g = geo({8, 8, 8});
    LabelMap a(g, std::uint8_t{0}), b(g, std::uint8_t{0});

    SUBCASE("both empty -> 1, one empty -> 0") {
        CHECK(surface_dice(a, b, 2.0) == 1.0);
        a.at(1, 1, 1) = 1;
        CHECK(surface_dice(a, b, 2.0) == 0.0);
    }
    SUBCASE("identical masks -> 1") {
        for (std::int64_t k = 2; k < 5; ++k)
            for (std::int64_t j = 2; j < 5; ++j)
                for (std::int64_t i = 2; i < 5; ++i) {
                    a.at(i, j, k) = 1;
                    b.at(i, j, k) = 1;
                }
        CHECK(surface_dice(a, b, 0.0) == 1.0);
    }
    SUBCASE("one-voxel shift within 2 mm tolerance -> 1") {
        for (std::int64_t k = 2; k < 5; ++k)
            for (std::int64_t j = 2; j < 5; ++j)
                for (std::int64_t i = 2; i < 5; ++i) {
                    a.at(i, j, k) = 1;
                    b.at(i + 1, j, k) = 1;
                }
        CHECK(surface_dice(a, b, 2.0) == 1.0);
    }
    SUBCASE("far-apart masks -> 0") {
        a.at(0, 0, 0) = 1;
        b.at(7, 7, 7) = 1;
        CHECK(surface_dice(a, b, 1.0) == 0.0);
    }
    SUBCASE("distance transform and brute force agree") {
        Rng rng(17);
        for (int trial = 0; trial < 25; ++trial) {
            const Geometry gr = geo({7, 6, 5}, {1.5, 1.0, 2.5});
            const LabelMap p = random_mask(gr, rng, 0.2);
            const LabelMap t = random_mask(gr, rng, 0.2);
            const double tol = rng.uniform(0.0, 4.0);
            const double fast = surface_dice(p, t, tol, SurfaceDistanceMethod::distance_transform);
            const double brute = surface_dice(p, t, tol, SurfaceDistanceMethod::brute_force);
            REQUIRE(fast == doctest::Approx(brute).epsilon(1e-12));
        }
    }
}

TEST_CASE("metric suite matches the brute-force oracle on random masks") {
    Rng rng(2024);
    for (int trial = 0; trial < 120; ++trial) {
        const std::int64_t n = 6 + std::int64_t(rng.next_below(3));
        const Geometry g = geo({n, n, n}, {1.0 + rng.next_double(), 1.0 + rng.next_double(),
                                           1.0 + rng.next_double()});
        const LabelMap pred = random_mask(g, rng, 0.1 + 0.2 * rng.next_double());
        const LabelMap gt = random_mask(g, rng, 0.1 + 0.2 * rng.next_double());
        const int conn_choice[3] = {6, 18, 26};
        const int conn = conn_choice[rng.next_below(3)];
        const double tol = rng.uniform(0.5, 3.0);

        CHECK(dice(pred, gt) == doctest::Approx(oracle::dice(pred, gt)).epsilon(1e-12));
        CHECK(false_positive_volume(pred, gt, connectivity_from_int(conn)) ==
              doctest::Approx(oracle::fpv_ml(pred, gt, conn)).epsilon(1e-12));
        CHECK(false_negative_volume(pred, gt, connectivity_from_int(conn)) ==
              doctest::Approx(oracle::fnv_ml(pred, gt, conn)).epsilon(1e-12));
        CHECK(surface_dice(pred, gt, tol) == doctest::Approx(oracle::nsd(pred, gt, tol)).epsilon(1e-12));

        const auto cm = connected_components(pred, connectivity_from_int(conn));
        CHECK(std::size_t(cm.count) == oracle::components(pred, conn).size());
    }
}

TEST_CASE("metric symmetries and monotonicity") {
    Rng rng(555);
    const Geometry g = geo({6, 6, 6}, {1, 2, 3});
    for (int trial = 0; trial < 30; ++trial) {
        const LabelMap a = random_mask(g, rng, 0.25);
        const LabelMap b = random_mask(g, rng, 0.25);
        CHECK(dice(a, b) == dice(b, a));
        CHECK(false_negative_volume(a, b, Connectivity::twenty_six) ==
              false_positive_volume(b, a, Connectivity::twenty_six));

        // FPV + matched pred volume == total pred volume
        const double fpv = false_positive_volume(a, b, Connectivity::twenty_six);
        const auto cm = connected_components(a, Connectivity::twenty_six);
        double matched = 0;
        {
            std::vector<char> touched(std::size_t(cm.count) + 1, 0);
            std::vector<std::int64_t> size(std::size_t(cm.count) + 1, 0);
            for (std::size_t v = 0; v < a.labels.size(); ++v)
                if (cm.labels[v]) {
                    ++size[std::size_t(cm.labels[v])];
                    if (b.labels[v]) touched[std::size_t(cm.labels[v])] = 1;
                }
            for (int c = 1; c <= cm.count; ++c)
                if (touched[std::size_t(c)]) matched += double(size[std::size_t(c)]);
        }
        const double total = double(a.foreground_count()) * voxel_volume_ml(g);
        CHECK(fpv + matched * voxel_volume_ml(g) == doctest::Approx(total).epsilon(1e-12));
    }

    SUBCASE("axis permutation invariance") {
        const Geometry gp = geo({5, 6, 7}, {1.0, 1.5, 2.0});
        const LabelMap a = random_mask(gp, rng, 0.3);
        const LabelMap b = random_mask(gp, rng, 0.3);

        // permute axes (0,1,2) -> (2,0,1) on both masks and the spacing
        Geometry gq = geo({7, 5, 6}, {2.0, 1.0, 1.5});
        LabelMap ap(gq, std::uint8_t{0}), bp(gq, std::uint8_t{0});
        for (std::int64_t oi = 0; oi < 5; ++oi)
            for (std::int64_t oj = 0; oj < 6; ++oj)
                for (std::int64_t ok = 0; ok < 7; ++ok) {
                    ap.at(ok, oi, oj) = a.at(oi, oj, ok);
                    bp.at(ok, oi, oj) = b.at(oi, oj, ok);
                }

        CHECK(dice(ap, bp) == dice(a, b));
        CHECK(false_positive_volume(ap, bp, Connectivity::twenty_six) ==
              doctest::Approx(false_positive_volume(a, b, Connectivity::twenty_six)).epsilon(1e-12));
        CHECK(false_negative_volume(ap, bp, Connectivity::six) ==
              doctest::Approx(false_negative_volume(a, b, Connectivity::six)).epsilon(1e-12));
        CHECK(surface_dice(ap, bp, 2.0) == doctest::Approx(surface_dice(a, b, 2.0)).epsilon(1e-12));
    }

    SUBCASE("a far-disjoint extra pred component never decreases FPV, never changes FNV") {
        const Geometry gb = geo({12, 12, 12});
        LabelMap pred(gb, std::uint8_t{0}), gt(gb, std::uint8_t{0});
        pred.at(1, 1, 1) = 1;
        gt.at(1, 1, 1) = 1;
        gt.at(2, 1, 1) = 1;
        const double fpv0 = false_positive_volume(pred, gt, Connectivity::twenty_six);
        const double fnv0 = false_negative_volume(pred, gt, Connectivity::twenty_six);
        pred.at(10, 10, 10) = 1; // far from everything
        CHECK(false_positive_volume(pred, gt, Connectivity::twenty_six) >= fpv0);
        CHECK(false_negative_volume(pred, gt, Connectivity::twenty_six) == fnv0);
    }
}

TEST_CASE("evaluate_case composes the suite on the lesion class") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({6, 6, 6}, {2, 2, 2});
    MetricParams params;

    SUBCASE("perfect prediction") {
        LabelMap m(g, std::uint8_t{0});
        m.at(1, 1, 1) = 1;
        m.at(3, 3, 3) = 2; // organ labels are ignored by the lesion reduction
        const CaseMetrics r = evaluate_case(m, m, schema, params);
        CHECK(r.dice == 1.0);
        CHECK(r.fpv_ml == 0.0);
        CHECK(r.fnv_ml == 0.0);
        CHECK(*r.nsd == 1.0);
    }
    SUBCASE("empty prediction against nonempty gt") {
        LabelMap pred(g, std::uint8_t{0});
        LabelMap gt(g, std::uint8_t{0});
        for (std::int64_t i = 0; i < 4; ++i) gt.at(i, 2, 2) = 1;
        const CaseMetrics r = evaluate_case(pred, gt, schema, params);
        CHECK(r.dice == 0.0);
        CHECK(r.fpv_ml == 0.0);
        CHECK(r.fnv_ml == doctest::Approx(4 * 0.008));
        CHECK(*r.nsd == 0.0);
    }
    SUBCASE("matches the oracle on random multilabel pairs") {
        Rng rng(8);
        for (int trial = 0; trial < 40; ++trial) {
            LabelMap pred(g, std::uint8_t{0}), gt(g, std::uint8_t{0});
            for (auto& v : pred.labels) v = std::uint8_t(rng.next_below(4)); // 0..3
            for (auto& v : gt.labels) v = std::uint8_t(rng.next_below(4));
            const CaseMetrics r = evaluate_case(pred, gt, schema, params);

            LabelMap pl(g, std::uint8_t{0}), gl(g, std::uint8_t{0});
            for (std::size_t v = 0; v < pred.labels.size(); ++v) {
                pl.labels[v] = pred.labels[v] == 1;
                gl.labels[v] = gt.labels[v] == 1;
            }
            CHECK(r.dice == doctest::Approx(oracle::dice(pl, gl)).epsilon(1e-12));
            CHECK(r.fpv_ml == doctest::Approx(oracle::fpv_ml(pl, gl, 26)).epsilon(1e-12));
            CHECK(r.fnv_ml == doctest::Approx(oracle::fnv_ml(pl, gl, 26)).epsilon(1e-12));
            CHECK(*r.nsd == doctest::Approx(oracle::nsd(pl, gl, 2.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("summarize: aggregates and bootstrap CIs") {
    auto row = [](const std::string& id, double d, double fpv, double fnv) {
        CaseMetrics m;
        m.study_id = id;
        m.dice = d;
        m.fpv_ml = fpv;
        m.fnv_ml = fnv;
        m.nsd = d;
        return m;
    };

    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(summarize({}, 0.95, 100, 1), EmptyInputError);
    }
    SUBCASE("single row: degenerate CI at the value") {
        const auto rep = summarize({row("a", 0.7, 1.0, 2.0)}, 0.95, 500, 42);
        CHECK(rep.dice.mean == doctest::Approx(0.7));
        CHECK(rep.dice.ci_lo == doctest::Approx(0.7));
        CHECK(rep.dice.ci_hi == doctest::Approx(0.7));
        CHECK(rep.dice.std_dev == 0.0);
    }
    SUBCASE("identical rows: CI collapses") {
        const auto rep = summarize({row("a", 0.5, 1, 1), row("b", 0.5, 1, 1), row("c", 0.5, 1, 1)},
                                   0.95, 1000, 7);
        CHECK(rep.dice.ci_lo == doctest::Approx(0.5));
        CHECK(rep.dice.ci_hi == doctest::Approx(0.5));
    }
    SUBCASE("deterministic for a fixed seed and order-independent") {
        const std::vector<CaseMetrics> rows{row("a", 0.6, 1, 0), row("b", 0.7, 2, 1),
                                            row("c", 0.8, 0, 3)};
        std::vector<CaseMetrics> shuffled{rows[2], rows[0], rows[1]};
        const auto r1 = summarize(rows, 0.95, 10000, 123);
        const auto r2 = summarize(shuffled, 0.95, 10000, 123);
        CHECK(r1.dice.ci_lo == r2.dice.ci_lo);
        CHECK(r1.dice.ci_hi == r2.dice.ci_hi);
        CHECK(r1.fpv_ml.ci_lo == r2.fpv_ml.ci_lo);
        CHECK(r1.to_json() == r2.to_json());
    }
    SUBCASE("ci brackets the mean and csv has the right shape") {
        const auto rep = summarize({row("a", 0.6, 1, 0), row("b", 0.7, 2, 1), row("c", 0.9, 4, 2)},
                                   0.95, 5000, 9);
        CHECK(rep.dice.ci_lo <= rep.dice.mean);
        CHECK(rep.dice.mean <= rep.dice.ci_hi);
        const std::string csv = rep.to_csv();
        CHECK(csv.rfind("study_id,dice,fpv_ml,fnv_ml,nsd\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    }
}
