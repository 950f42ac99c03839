#ifndef PETSEG_FOLDS_HPP
#define PETSEG_FOLDS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "petseg/errors.hpp"

namespace petseg {

struct StudyPaths {
    std::string ct;
    std::string pet;
    std::string lesion;
    std::vector<std::string> organs;
};

struct StudyRecord {
    std::string study_id;
    std::string subject_id;
    StudyPaths paths;
};

// JSON manifest: a list of StudyRecord objects.
std::vector<StudyRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<StudyRecord>& studies, const std::filesystem::path& path);
std::string manifest_to_json(const std::vector<StudyRecord>& studies);
std::vector<StudyRecord> manifest_from_json(const std::string& text);

struct FoldAssignment {
    int k = 0;
    std::uint64_t seed = 0;
    std::map<std::string, int> assignment; // study_id -> fold in [0, k)

    std::string to_json() const;
    static FoldAssignment from_json(const std::string& text);
};

// Deterministic subject-grouped K-fold split: subjects are sorted, shuffled
// by the seeded RNG, and greedily assigned to the currently smallest fold by
// study count (ties to the lowest fold index). All studies of a subject land
// in one fold.
FoldAssignment grouped_kfold(const std::vector<StudyRecord>& studies, int k, std::uint64_t seed);

struct HoldoutSplit {
    std::vector<StudyRecord> train;
    std::vector<StudyRecord> holdout;
    bool hit_target = true; // false when grouping forced a nearby size
};

// Subject-grouped two-way split whose holdout size is as close to the target
// as the grouping permits (exact when achievable).
HoldoutSplit holdout_split(const std::vector<StudyRecord>& studies, std::int64_t n_holdout_studies,
                           std::uint64_t seed);

} // namespace petseg

#endif
