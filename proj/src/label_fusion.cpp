#include "petseg/label_fusion.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

namespace petseg {

using nlohmann::json;

void LabelSchema::validate() const {
    if (names.size() < 2)
        throw ValidationError("schema needs background plus at least one foreground class");
    if (names.size() > 256)
        throw ValidationError("schema exceeds 255 foreground classes");
    if (names[0] != "background")
        throw ValidationError("schema class 0 must be \"background\"");
    if (names[1] != "lesion")
        throw ValidationError("schema class 1 must be \"lesion\"");
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty())
            throw ValidationError("schema class names must be nonempty");
        if (!seen.insert(n).second)
            throw ValidationError("duplicate schema class name: " + n);
    }
}

std::string LabelSchema::to_json() const {
    json arr = json::array();
    for (std::size_t id = 0; id < names.size(); ++id)
        arr.push_back({{"id", id}, {"name", names[id]}});
    return arr.dump(2) + "\n";
}

LabelSchema LabelSchema::from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("schema JSON parse error: ") + e.what());
    }
    if (!arr.is_array())
        throw FormatError("schema JSON must be a list of {id, name} objects");
    LabelSchema schema;
    schema.names.resize(arr.size());
    std::vector<bool> seen(arr.size(), false);
    for (const auto& entry : arr) {
        if (!entry.contains("id") || !entry.contains("name"))
            throw FormatError("schema entries need id and name");
        const auto id = entry["id"].get<std::size_t>();
        if (id >= schema.names.size() || seen[id])
            throw FormatError("schema ids must be consecutive from 0 without repeats");
        schema.names[id] = entry["name"].get<std::string>();
        seen[id] = true;
    }
    schema.validate();
    return schema;
}

LabelSchema LabelSchema::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open schema: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

void LabelSchema::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write schema: " + path.string());
    out << to_json();
}

LabelSchema LabelSchema::autopet() {
    return LabelSchema{{"background", "lesion", "liver", "kidneys", "urinary_bladder", "spleen",
                        "lung", "brain", "heart", "stomach"}};
}

LabelSchema LabelSchema::lesion_only() {
    return LabelSchema{{"background", "lesion"}};
}

LabelSchema LabelSchema::synthetic(int n_organs) {
    LabelSchema schema{{"background", "lesion"}};
    for (int i = 1; i <= n_organs; ++i)
        schema.names.push_back("organ_" + std::to_string(i));
    return schema;
}

FusionPolicy FusionPolicy::default_for(const LabelSchema& schema) {
    FusionPolicy policy;
    for (int id = 1; id < schema.num_classes(); ++id)
        policy.precedence.push_back(static_cast<std::uint8_t>(id));
    return policy;
}

void FusionPolicy::validate(const LabelSchema& schema) const {
    if (precedence.size() != static_cast<std::size_t>(schema.num_foreground()))
        throw ValidationError("fusion precedence must cover every foreground class");
    std::vector<bool> seen(schema.num_classes(), false);
    for (auto id : precedence) {
        if (id == 0 || !schema.contains(id) || seen[id])
            throw ValidationError("fusion precedence must be a permutation of foreground ids");
        seen[id] = true;
    }
}

namespace {

void require_binary(const LabelMap& m, const char* what) {
    if (!m.is_binary())
        throw ValidationError(std::string(what) + " mask must be {0,1}-valued");
}

} // namespace

LabelMap fuse_labels(const LabelMap& lesion, const std::vector<LabelMap>& organs,
                     const LabelSchema& schema, const FusionPolicy& policy) {
    schema.validate();
    policy.validate(schema);
    if (organs.size() != static_cast<std::size_t>(schema.num_foreground() - 1))
        throw ValidationError("expected one organ mask per non-lesion foreground class");

    require_binary(lesion, "lesion");
    for (std::size_t i = 0; i < organs.size(); ++i) {
        require_same_grid(lesion.geometry, organs[i].geometry, "fuse_labels");
        require_binary(organs[i], "organ");
    }

    // masks[id] for foreground id: 1 = lesion, i+2 = organs[i]
    std::vector<const LabelMap*> masks(schema.num_classes(), nullptr);
    masks[1] = &lesion;
    for (std::size_t i = 0; i < organs.size(); ++i)
        masks[i + 2] = &organs[i];

    LabelMap fused(lesion.geometry, std::uint8_t{0});
    const std::size_t n = fused.labels.size();
    for (auto it = policy.precedence.rbegin(); it != policy.precedence.rend(); ++it) {
        // painting lowest priority first lets higher priority overwrite
        const LabelMap& mask = *masks[*it];
        const std::uint8_t id = *it;
        for (std::size_t v = 0; v < n; ++v)
            if (mask.labels[v]) fused.labels[v] = id;
    }
    return fused;
}

LabelMap fuse_labels(const LabelMap& lesion, const std::vector<LabelMap>& organs,
                     const LabelSchema& schema) {
    return fuse_labels(lesion, organs, schema, FusionPolicy::default_for(schema));
}

LabelMap reduce_to_lesion(const LabelMap& multilabel) {
    multilabel.validate();
    LabelMap out(multilabel.geometry, std::uint8_t{0});
    for (std::size_t v = 0; v < multilabel.labels.size(); ++v)
        out.labels[v] = multilabel.labels[v] == 1 ? 1 : 0;
    return out;
}

LabelMap reduce_to_lesion(const LabelMap& multilabel, const LabelSchema& schema) {
    schema.validate();
    for (auto v : multilabel.labels)
        if (!schema.contains(v))
            throw ValidationError("label map contains value " + std::to_string(int(v)) +
                                  " outside the schema");
    return reduce_to_lesion(multilabel);
}

LabelValidationReport validate_label_map(const LabelMap& map, const LabelSchema& schema) {
    schema.validate();
    map.validate();

    LabelValidationReport report;
    std::vector<std::int64_t> counts(256, 0);
    for (auto v : map.labels) ++counts[v];

    const double vox_ml = voxel_volume_ml(map.geometry);
    for (int id = 0; id < schema.num_classes(); ++id) {
        ClassStats stats;
        stats.id = static_cast<std::uint8_t>(id);
        stats.name = schema.names[id];
        stats.voxel_count = counts[id];
        stats.volume_ml = double(counts[id]) * vox_ml;
        report.per_class.push_back(stats);
    }
    for (int v = schema.num_classes(); v < 256; ++v)
        if (counts[v] > 0) {
            report.out_of_schema_values.push_back(static_cast<std::uint8_t>(v));
            report.valid = false;
        }
    return report;
}

std::string LabelValidationReport::to_json() const {
    json j;
    j["valid"] = valid;
    j["out_of_schema_values"] = out_of_schema_values;
    json classes = json::array();
    for (const auto& c : per_class)
        classes.push_back({{"id", c.id},
                           {"name", c.name},
                           {"voxel_count", c.voxel_count},
                           {"volume_ml", c.volume_ml}});
    j["per_class"] = classes;
    return j.dump(2) + "\n";
}

} // namespace petseg
