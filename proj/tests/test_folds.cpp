#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "petseg/folds.hpp"
#include "petseg/rng.hpp"
#include "tempdir.hpp"

using namespace petseg;

namespace {

std::vector<StudyRecord> make_studies(const std::vector<std::pair<std::string, int>>& subjects) {
    std::vector<StudyRecord> studies;
    for (const auto& [subject, count] : subjects)
        for (int idx = 0; idx < count; ++idx)
            studies.push_back({subject + "_s" + std::to_string(idx), subject, {}});
    return studies;
}

// random manifest with multi-study subjects
std::vector<StudyRecord> random_manifest(Rng& rng, int n_subjects, int max_per_subject) {
    std::vector<std::pair<std::string, int>> subjects;
    for (int s = 0; s < n_subjects; ++s)
        subjects.push_back({"subj" + std::to_string(s), 1 + int(rng.next_below(max_per_subject))});
    return make_studies(subjects);
}

void check_grouping(const std::vector<StudyRecord>& studies, const FoldAssignment& fa) {
    std::map<std::string, std::set<int>> folds_per_subject;
    for (const auto& s : studies) {
        REQUIRE(fa.assignment.count(s.study_id) == 1);
        folds_per_subject[s.subject_id].insert(fa.assignment.at(s.study_id));
    }
    for (const auto& [subject, folds] : folds_per_subject) REQUIRE(folds.size() == 1);
}

} // namespace

TEST_CASE("studies of one subject share a fold") {
    const auto studies = make_studies({{"A", 2}, {"B", 1}, {"C", 1}});
    const auto fa = grouped_kfold(studies, 2, 7);
    CHECK(fa.assignment.at("A_s0") == fa.assignment.at("A_s1"));
    check_grouping(studies, fa);
}

TEST_CASE("paper-scale split: 1014 studies over 900 subjects into 5 folds") {
    // 786 singleton subjects + 114 two-study subjects = 900 subjects, 1014 studies
    std::vector<std::pair<std::string, int>> subjects;
    for (int s = 0; s < 786; ++s) subjects.push_back({"sing" + std::to_string(s), 1});
    for (int s = 0; s < 114; ++s) subjects.push_back({"twin" + std::to_string(s), 2});
    const auto studies = make_studies(subjects);
    REQUIRE(studies.size() == 1014);

    const auto fa = grouped_kfold(studies, 5, 42);
    check_grouping(studies, fa);
    CHECK(fa.assignment.size() == 1014);

    std::vector<std::int64_t> sizes(5, 0);
    for (const auto& [_, fold] : fa.assignment) {
        REQUIRE(fold >= 0);
        REQUIRE(fold < 5);
        ++sizes[std::size_t(fold)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    CHECK(*hi - *lo <= 2); // max subject group size
}

TEST_CASE("determinism and input-order independence") {
    Rng rng(11);
    auto studies = random_manifest(rng, 40, 3);
    const auto fa1 = grouped_kfold(studies, 4, 99);
    const auto fa2 = grouped_kfold(studies, 4, 99);
    CHECK(fa1.to_json() == fa2.to_json());

    auto reversed = studies;
    std::reverse(reversed.begin(), reversed.end());
    const auto fa3 = grouped_kfold(reversed, 4, 99);
    CHECK(fa1.to_json() == fa3.to_json());

    const auto fa4 = grouped_kfold(studies, 4, 100);
    CHECK(fa1.to_json() != fa4.to_json());
}

TEST_CASE("constraint sweep over random manifests") {
    Rng rng(2023);
    for (int trial = 0; trial < 100; ++trial) {
        const int n_subjects = 5 + int(rng.next_below(30));
        const auto studies = random_manifest(rng, n_subjects, 4);
        const int k = 2 + int(rng.next_below(4));
        if (n_subjects < k) continue;

        const auto fa = grouped_kfold(studies, k, rng.next_u64());
        check_grouping(studies, fa);

        std::int64_t max_group = 0;
        std::map<std::string, std::int64_t> group_sizes;
        for (const auto& s : studies) ++group_sizes[s.subject_id];
        for (const auto& [_, n] : group_sizes) max_group = std::max(max_group, n);

        std::vector<std::int64_t> sizes(std::size_t(k), 0);
        for (const auto& [_, fold] : fa.assignment) ++sizes[std::size_t(fold)];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        REQUIRE(*hi - *lo <= max_group);
    }
}

TEST_CASE("error cases") {
    const auto studies = make_studies({{"A", 1}, {"B", 1}});
    CHECK_THROWS_AS(grouped_kfold(studies, 1, 0), ValidationError);
    CHECK_THROWS_AS(grouped_kfold(studies, 3, 0), InfeasibleSplitError);

    auto dup = studies;
    dup.push_back({"A_s0", "A", {}});
    CHECK_THROWS_AS(grouped_kfold(dup, 2, 0), ValidationError);

    CHECK_THROWS_AS(holdout_split(studies, 0, 0), InfeasibleSplitError);
    CHECK_THROWS_AS(holdout_split(studies, 2, 0), InfeasibleSplitError);
}

TEST_CASE("holdout split") {
    SUBCASE("singleton subjects hit the target exactly") {
        Rng rng(3);
        const auto studies = random_manifest(rng, 40, 1);
        const auto split = holdout_split(studies, 10, 17);
        CHECK(split.hit_target);
        CHECK(split.holdout.size() == 10);
        CHECK(split.train.size() == 30);
    }
    SUBCASE("paper sizes 819/195 with grouped subjects") {
        std::vector<std::pair<std::string, int>> subjects;
        for (int s = 0; s < 786; ++s) subjects.push_back({"sing" + std::to_string(s), 1});
        for (int s = 0; s < 114; ++s) subjects.push_back({"twin" + std::to_string(s), 2});
        const auto studies = make_studies(subjects);
        const auto split = holdout_split(studies, 195, 5);
        CHECK(split.hit_target);
        CHECK(split.holdout.size() == 195);
        CHECK(split.train.size() == 819);

        std::set<std::string> train_subjects, holdout_subjects;
        for (const auto& s : split.train) train_subjects.insert(s.subject_id);
        for (const auto& s : split.holdout) holdout_subjects.insert(s.subject_id);
        for (const auto& s : train_subjects) REQUIRE(holdout_subjects.count(s) == 0);
    }
    SUBCASE("infeasible exact target returns nearest size with a warning") {
        // subjects of sizes {2,2}: only holdout sizes {0,2,4} are groupable;
        // target 3 = total - 1 cannot be hit
        const auto studies = make_studies({{"A", 2}, {"B", 2}});
        const auto split = holdout_split(studies, 3, 1);
        CHECK_FALSE(split.hit_target);
        CHECK(split.holdout.size() == 2);
        CHECK(split.train.size() == 2);
    }
    SUBCASE("deterministic per seed") {
        Rng rng(5);
        const auto studies = random_manifest(rng, 25, 3);
        const auto a = holdout_split(studies, 12, 77);
        const auto b = holdout_split(studies, 12, 77);
        REQUIRE(a.holdout.size() == b.holdout.size());
        for (std::size_t idx = 0; idx < a.holdout.size(); ++idx)
            CHECK(a.holdout[idx].study_id == b.holdout[idx].study_id);
    }
}

TEST_CASE("manifest and assignment JSON round-trips") {
    testsupport::TempDir tmp("folds");
    std::vector<StudyRecord> studies = make_studies({{"A", 2}, {"B", 1}});
    studies[0].paths.ct = "ct0.nii.gz";
    studies[0].paths.pet = "pet0.nii.gz";
    studies[0].paths.lesion = "les0.nii.gz";
    studies[0].paths.organs = {"o1.nii.gz", "o2.nii.gz"};

    save_manifest(studies, tmp.file("manifest.json"));
    const auto back = load_manifest(tmp.file("manifest.json"));
    REQUIRE(back.size() == studies.size());
    CHECK(back[0].study_id == "A_s0");
    CHECK(back[0].paths.ct == "ct0.nii.gz");
    CHECK(back[0].paths.organs.size() == 2);

    const auto fa = grouped_kfold(studies, 2, 1);
    const auto fa2 = FoldAssignment::from_json(fa.to_json());
    CHECK(fa2.k == fa.k);
    CHECK(fa2.seed == fa.seed);
    CHECK(fa2.assignment == fa.assignment);

    CHECK_THROWS_AS(load_manifest(tmp.file("missing.json")), IoError);
    CHECK_THROWS_AS(manifest_from_json("[{\"study_id\": \"x\"}]"), FormatError);
}
