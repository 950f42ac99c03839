#ifndef PETSEG_LABEL_FUSION_HPP
#define PETSEG_LABEL_FUSION_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg {

// Ordered class list. Class ids are consecutive from 0 (background); class 1
// is always the lesion, the class predictions are scored on.
struct LabelSchema {
    std::vector<std::string> names; // names[id] = class name; names[0] == "background"

    int num_classes() const { return static_cast<int>(names.size()); }
    int num_foreground() const { return num_classes() - 1; }

    void validate() const;
    bool contains(std::uint8_t id) const { return id < names.size(); }

    std::string to_json() const;
    static LabelSchema from_json(const std::string& text);
    static LabelSchema load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // The AutoPET organ set: lesion plus liver, kidneys, urinary bladder,
    // spleen, lung, brain, heart, stomach.
    static LabelSchema autopet();
    // background + lesion only
    static LabelSchema lesion_only();
    // background + lesion + n generic organ classes (synthetic studies)
    static LabelSchema synthetic(int n_organs);
};

// Overlap resolution: higher-priority classes win. Default puts the lesion
// first so expert annotations survive fusion, then organs in schema order.
struct FusionPolicy {
    std::vector<std::uint8_t> precedence; // foreground ids, highest priority first

    static FusionPolicy default_for(const LabelSchema& schema);
    void validate(const LabelSchema& schema) const;
};

// Builds the multilabel map from one binary lesion mask plus one binary mask
// per foreground organ class (schema order: organs[i] is class i+2). All
// masks must share one geometry.
LabelMap fuse_labels(const LabelMap& lesion, const std::vector<LabelMap>& organs,
                     const LabelSchema& schema, const FusionPolicy& policy);

LabelMap fuse_labels(const LabelMap& lesion, const std::vector<LabelMap>& organs,
                     const LabelSchema& schema);

// Binary mask selecting exactly the lesion class. The schema-checked
// overload rejects out-of-schema values.
LabelMap reduce_to_lesion(const LabelMap& multilabel);
LabelMap reduce_to_lesion(const LabelMap& multilabel, const LabelSchema& schema);

struct ClassStats {
    std::uint8_t id = 0;
    std::string name;
    std::int64_t voxel_count = 0;
    double volume_ml = 0.0;
};

struct LabelValidationReport {
    bool valid = true;
    std::vector<std::uint8_t> out_of_schema_values;
    std::vector<ClassStats> per_class;

    std::string to_json() const;
};

LabelValidationReport validate_label_map(const LabelMap& map, const LabelSchema& schema);

} // namespace petseg

#endif
