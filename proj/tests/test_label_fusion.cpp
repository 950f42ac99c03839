#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "petseg/label_fusion.hpp"
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

LabelMap random_mask(const Geometry& g, Rng& rng, double density) {
    LabelMap m(g, std::uint8_t{0});
    for (auto& v : m.labels) v = rng.next_double() < density ? 1 : 0;
    return m;
}

} // namespace

TEST_CASE("autopet schema matches the organ list") {
    const LabelSchema schema = LabelSchema::autopet();
    schema.validate();
    CHECK(schema.num_classes() == 10);
    CHECK(schema.names[1] == "lesion");
    CHECK(schema.names[2] == "liver");
    CHECK(schema.names[4] == "urinary_bladder");
    CHECK(schema.names[9] == "stomach");
}

TEST_CASE("schema JSON round-trip and validation") {
    const LabelSchema schema = LabelSchema::autopet();
    const LabelSchema back = LabelSchema::from_json(schema.to_json());
    CHECK(back.names == schema.names);

    CHECK_THROWS_AS(LabelSchema::from_json("{\"not\": \"a list\"}"), FormatError);
    CHECK_THROWS_AS(LabelSchema({{"background"}}).validate(), ValidationError);
    CHECK_THROWS_AS(LabelSchema({{"background", "liver"}}).validate(), ValidationError);

    testsupport::TempDir tmp("schema");
    schema.save(tmp.file("schema.json"));
    CHECK(LabelSchema::load(tmp.file("schema.json")).names == schema.names);
}

TEST_CASE("fusion precedence") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({4, 4, 4});

    LabelMap lesion(g, std::uint8_t{0});
    lesion.at(1, 1, 1) = 1;
    std::vector<LabelMap> organs(8, LabelMap(g, std::uint8_t{0}));
    organs[0].at(1, 1, 1) = 1; // liver overlaps the lesion voxel
    organs[0].at(2, 2, 2) = 1;
    organs[4].at(3, 3, 3) = 1; // lung

    const LabelMap fused = fuse_labels(lesion, organs, schema);
    CHECK(fused.at(1, 1, 1) == 1); // lesion wins
    CHECK(fused.at(2, 2, 2) == 2); // liver
    CHECK(fused.at(3, 3, 3) == 6); // lung
    CHECK(fused.at(0, 0, 0) == 0);
}

TEST_CASE("fusion counts: lesion inside liver") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({10, 10, 10});

    // 100-voxel liver block, 5-voxel lesion fully inside
    LabelMap lesion(g, std::uint8_t{0});
    std::vector<LabelMap> organs(8, LabelMap(g, std::uint8_t{0}));
    for (std::int64_t k = 0; k < 4; ++k)
        for (std::int64_t j = 0; j < 5; ++j)
            for (std::int64_t i = 0; i < 5; ++i) organs[0].at(i, j, k) = 1;
    for (std::int64_t i = 0; i < 5; ++i) lesion.at(i, 0, 0) = 1;

    const LabelMap fused = fuse_labels(lesion, organs, schema);
    std::int64_t lesion_count = 0, liver_count = 0;
    for (auto v : fused.labels) {
        lesion_count += v == 1;
        liver_count += v == 2;
    }
    CHECK(lesion_count == 5);
    CHECK(liver_count == 95);
}

TEST_CASE("fusion rejects bad inputs") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({4, 4, 4});
    LabelMap lesion(g, std::uint8_t{0});
    std::vector<LabelMap> organs(8, LabelMap(g, std::uint8_t{0}));

    SUBCASE("geometry mismatch") {
        organs[3] = LabelMap(geo({5, 4, 4}), std::uint8_t{0});
        CHECK_THROWS_AS(fuse_labels(lesion, organs, schema), GridError);
    }
    SUBCASE("non-binary mask") {
        organs[2].at(0, 0, 0) = 2;
        CHECK_THROWS_AS(fuse_labels(lesion, organs, schema), ValidationError);
    }
    SUBCASE("wrong organ count") {
        organs.pop_back();
        CHECK_THROWS_AS(fuse_labels(lesion, organs, schema), ValidationError);
    }
}

TEST_CASE("reduce_to_lesion") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({3, 3, 3});

    SUBCASE("all-background maps to all-zero") {
        const LabelMap out = reduce_to_lesion(LabelMap(g, std::uint8_t{0}), schema);
        CHECK(out.foreground_count() == 0);
    }
    SUBCASE("selects exactly the label-1 voxels") {
        LabelMap m(g, std::uint8_t{0});
        m.at(0, 0, 0) = 1;
        m.at(1, 1, 1) = 2;
        m.at(2, 2, 2) = 5;
        const LabelMap out = reduce_to_lesion(m, schema);
        CHECK(out.at(0, 0, 0) == 1);
        CHECK(out.at(1, 1, 1) == 0);
        CHECK(out.at(2, 2, 2) == 0);
        CHECK(out.foreground_count() == 1);
    }
    SUBCASE("out-of-schema value is rejected") {
        LabelMap m(g, std::uint8_t{0});
        m.at(0, 0, 0) = 77;
        CHECK_THROWS_AS(reduce_to_lesion(m, schema), ValidationError);
    }
}

TEST_CASE("fusion is lossless for the lesion across random overlapping masks") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({8, 8, 8});
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const LabelMap lesion = random_mask(g, rng, 0.15);
        std::vector<LabelMap> organs;
        for (int o = 0; o < 8; ++o) organs.push_back(random_mask(g, rng, 0.25));
        const LabelMap fused = fuse_labels(lesion, organs, schema);
        const LabelMap back = reduce_to_lesion(fused, schema);
        REQUIRE(back.labels == lesion.labels);
    }
}

TEST_CASE("re-fusing the indicator decomposition is idempotent") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({6, 6, 6});
    Rng rng(7);
    const LabelMap lesion = random_mask(g, rng, 0.2);
    std::vector<LabelMap> organs;
    for (int o = 0; o < 8; ++o) organs.push_back(random_mask(g, rng, 0.2));
    const LabelMap fused = fuse_labels(lesion, organs, schema);

    // decompose the fused map into per-class indicators and fuse again
    LabelMap lesion2(g, std::uint8_t{0});
    std::vector<LabelMap> organs2(8, LabelMap(g, std::uint8_t{0}));
    for (std::size_t v = 0; v < fused.labels.size(); ++v) {
        if (fused.labels[v] == 1) lesion2.labels[v] = 1;
        if (fused.labels[v] >= 2) organs2[std::size_t(fused.labels[v] - 2)].labels[v] = 1;
    }
    const LabelMap fused2 = fuse_labels(lesion2, organs2, schema);
    CHECK(fused2.labels == fused.labels);
}

TEST_CASE("fused foreground count never exceeds the mask union") {
    const LabelSchema schema = LabelSchema::synthetic(2);
    const Geometry g = geo({6, 6, 6});
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const LabelMap lesion = random_mask(g, rng, 0.3);
        std::vector<LabelMap> organs{random_mask(g, rng, 0.3), random_mask(g, rng, 0.3)};
        const LabelMap fused = fuse_labels(lesion, organs, schema);

        std::int64_t union_count = 0;
        bool disjoint = true;
        for (std::size_t v = 0; v < lesion.labels.size(); ++v) {
            const int members = lesion.labels[v] + organs[0].labels[v] + organs[1].labels[v];
            union_count += members > 0;
            if (members > 1) disjoint = false;
        }
        CHECK(fused.foreground_count() == union_count);
        std::int64_t mask_total = lesion.foreground_count() + organs[0].foreground_count() +
                                  organs[1].foreground_count();
        if (disjoint)
            CHECK(union_count == mask_total);
        else
            CHECK(union_count < mask_total);
    }
}

TEST_CASE("validate_label_map reports out-of-schema values and volumes") {
    const LabelSchema schema = LabelSchema::autopet();
    const Geometry g = geo({10, 10, 10}, {2, 2, 2});

    SUBCASE("out-of-schema value flagged") {
        LabelMap m(g, std::uint8_t{0});
        m.at(0, 0, 0) = 77;
        const auto report = validate_label_map(m, schema);
        CHECK_FALSE(report.valid);
        REQUIRE(report.out_of_schema_values.size() == 1);
        CHECK(report.out_of_schema_values[0] == 77);
    }
    SUBCASE("empty map is valid with zero counts") {
        const auto report = validate_label_map(LabelMap(g, std::uint8_t{0}), schema);
        CHECK(report.valid);
        for (const auto& c : report.per_class)
            if (c.id != 0) CHECK(c.voxel_count == 0);
    }
    SUBCASE("kidney volume in mL") {
        LabelMap m(g, std::uint8_t{0});
        for (std::int64_t i = 0; i < 10; ++i) m.at(i, 2, 2) = 3;
        const auto report = validate_label_map(m, schema);
        CHECK(report.per_class[3].name == "kidneys");
        CHECK(report.per_class[3].voxel_count == 10);
        CHECK(report.per_class[3].volume_ml == doctest::Approx(0.08));
    }
}
