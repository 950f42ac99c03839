#include "petseg/folds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "petseg/errors.hpp"
#include "petseg/rng.hpp"

namespace petseg {

using nlohmann::json;

std::string manifest_to_json(const std::vector<StudyRecord>& studies) {
    json arr = json::array();
    for (const auto& s : studies) {
        json paths{{"ct", s.paths.ct},
                   {"pet", s.paths.pet},
                   {"lesion", s.paths.lesion},
                   {"organs", s.paths.organs}};
        arr.push_back({{"study_id", s.study_id}, {"subject_id", s.subject_id}, {"paths", paths}});
    }
    return arr.dump(2) + "\n";
}

std::vector<StudyRecord> manifest_from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest JSON parse error: ") + e.what());
    }
    if (!arr.is_array())
        throw FormatError("manifest must be a JSON list of study records");

    std::vector<StudyRecord> studies;
    std::set<std::string> ids;
    for (const auto& entry : arr) {
        StudyRecord s;
        if (!entry.contains("study_id") || !entry.contains("subject_id"))
            throw FormatError("manifest entries need study_id and subject_id");
        s.study_id = entry["study_id"].get<std::string>();
        s.subject_id = entry["subject_id"].get<std::string>();
        if (s.subject_id.empty())
            throw ValidationError("subject_id must be nonempty");
        if (!ids.insert(s.study_id).second)
            throw ValidationError("duplicate study_id in manifest: " + s.study_id);
        if (entry.contains("paths")) {
            const auto& p = entry["paths"];
            s.paths.ct = p.value("ct", "");
            s.paths.pet = p.value("pet", "");
            s.paths.lesion = p.value("lesion", "");
            if (p.contains("organs")) s.paths.organs = p["organs"].get<std::vector<std::string>>();
        }
        studies.push_back(std::move(s));
    }
    return studies;
}

std::vector<StudyRecord> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return manifest_from_json(text);
}

void save_manifest(const std::vector<StudyRecord>& studies, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write manifest: " + path.string());
    out << manifest_to_json(studies);
}

std::string FoldAssignment::to_json() const {
    json folds = json::object();
    for (const auto& [study, fold] : assignment) folds[study] = fold;
    json j{{"seed", seed}, {"k", k}, {"folds", folds}};
    return j.dump(2) + "\n";
}

FoldAssignment FoldAssignment::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("fold assignment parse error: ") + e.what());
    }
    FoldAssignment fa;
    fa.seed = j.at("seed").get<std::uint64_t>();
    fa.k = j.at("k").get<int>();
    for (const auto& [study, fold] : j.at("folds").items())
        fa.assignment[study] = fold.get<int>();
    return fa;
}

namespace {

struct SubjectGroup {
    std::string subject_id;
    std::vector<std::size_t> member_indices; // into the input study list
};

// Canonical pre-sort by subject_id makes the split independent of manifest
// order; the seeded shuffle then decides placement.
std::vector<SubjectGroup> shuffled_groups(const std::vector<StudyRecord>& studies,
                                          std::uint64_t seed) {
    std::map<std::string, SubjectGroup> by_subject;
    for (std::size_t idx = 0; idx < studies.size(); ++idx) {
        auto& g = by_subject[studies[idx].subject_id];
        g.subject_id = studies[idx].subject_id;
        g.member_indices.push_back(idx);
    }
    std::vector<SubjectGroup> groups;
    groups.reserve(by_subject.size());
    for (auto& [_, g] : by_subject) groups.push_back(std::move(g)); // sorted by subject_id

    Rng rng(seed);
    rng.shuffle(groups);
    return groups;
}

void check_unique_ids(const std::vector<StudyRecord>& studies) {
    std::set<std::string> ids;
    for (const auto& s : studies) {
        if (s.subject_id.empty())
            throw ValidationError("subject_id must be nonempty");
        if (!ids.insert(s.study_id).second)
            throw ValidationError("duplicate study_id: " + s.study_id);
    }
}

} // namespace

FoldAssignment grouped_kfold(const std::vector<StudyRecord>& studies, int k, std::uint64_t seed) {
    if (k < 2)
        throw ValidationError("grouped_kfold needs k >= 2");
    check_unique_ids(studies);

    auto groups = shuffled_groups(studies, seed);
    if (groups.size() < static_cast<std::size_t>(k))
        throw InfeasibleSplitError("fewer distinct subjects than folds");

    std::vector<std::int64_t> fold_sizes(static_cast<std::size_t>(k), 0);
    FoldAssignment fa;
    fa.k = k;
    fa.seed = seed;
    for (const auto& g : groups) {
        int smallest = 0;
        for (int f = 1; f < k; ++f)
            if (fold_sizes[f] < fold_sizes[smallest]) smallest = f;
        for (auto idx : g.member_indices)
            fa.assignment[studies[idx].study_id] = smallest;
        fold_sizes[smallest] += static_cast<std::int64_t>(g.member_indices.size());
    }
    return fa;
}

HoldoutSplit holdout_split(const std::vector<StudyRecord>& studies, std::int64_t n_holdout_studies,
                           std::uint64_t seed) {
    const auto total = static_cast<std::int64_t>(studies.size());
    if (n_holdout_studies <= 0 || n_holdout_studies >= total)
        throw InfeasibleSplitError("holdout target must satisfy 0 < target < total studies");
    check_unique_ids(studies);

    auto groups = shuffled_groups(studies, seed);
    const auto n_groups = groups.size();
    if (n_groups < 2)
        throw InfeasibleSplitError("need at least two subjects to split");

    // Subset-sum over group sizes finds the achievable holdout size closest
    // to the target (groups are indivisible). reachable[g][s]: some subset of
    // the first g groups sums to s.
    const auto t = static_cast<std::size_t>(total);
    std::vector<std::vector<char>> reachable(n_groups + 1, std::vector<char>(t + 1, 0));
    reachable[0][0] = 1;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::size_t size = groups[g].member_indices.size();
        for (std::size_t s = 0; s <= t; ++s) {
            reachable[g + 1][s] = reachable[g][s];
            if (s >= size && reachable[g][s - size]) reachable[g + 1][s] = 1;
        }
    }

    // best achievable size: closest to target; ties prefer the smaller size;
    // both sides must stay nonempty
    std::int64_t best = -1;
    for (std::int64_t s = 1; s < total; ++s) {
        if (!reachable[n_groups][static_cast<std::size_t>(s)]) continue;
        if (best < 0 ||
            std::llabs(s - n_holdout_studies) < std::llabs(best - n_holdout_studies))
            best = s;
    }
    if (best < 0)
        throw InfeasibleSplitError("no grouped split keeps both sides nonempty");

    // walk back through the DP, preferring to leave a group out so the
    // holdout keeps the latest shuffled groups it can
    std::vector<bool> in_holdout(n_groups, false);
    std::int64_t remaining = best;
    for (std::size_t g = n_groups; g-- > 0;) {
        const auto size = static_cast<std::int64_t>(groups[g].member_indices.size());
        if (reachable[g][static_cast<std::size_t>(remaining)]) continue;
        in_holdout[g] = true;
        remaining -= size;
    }

    HoldoutSplit split;
    split.hit_target = best == n_holdout_studies;
    std::vector<bool> study_in_holdout(studies.size(), false);
    for (std::size_t g = 0; g < n_groups; ++g)
        if (in_holdout[g])
            for (auto idx : groups[g].member_indices) study_in_holdout[idx] = true;
    for (std::size_t idx = 0; idx < studies.size(); ++idx)
        (study_in_holdout[idx] ? split.holdout : split.train).push_back(studies[idx]);
    return split;
}

} // namespace petseg
