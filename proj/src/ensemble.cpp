#include "petseg/ensemble.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "petseg/nifti.hpp"

namespace petseg {

using nlohmann::json;

void ProbabilityVolume::validate() const {
    geometry.validate();
    if (classes < 1)
        throw ValidationError("probability volume needs at least one class");
    const auto n = static_cast<std::size_t>(voxels());
    if (probs.size() != n * static_cast<std::size_t>(classes))
        throw ValidationError("probability array length does not match classes * voxels");
    for (std::int64_t v = 0; v < voxels(); ++v) {
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            const double p = at(c, v);
            if (!std::isfinite(p) || p < -1e-12)
                throw ValidationError("probabilities must be finite and nonnegative");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-5)
            throw ValidationError("per-voxel probabilities must sum to 1 within 1e-5");
    }
}

ProbabilityVolume average_probabilities(const std::vector<ProbabilityVolume>& maps) {
    if (maps.empty())
        throw EmptyInputError("average_probabilities needs at least one map");
    const auto& first = maps.front();
    for (const auto& m : maps) {
        if (m.classes != first.classes)
            throw ShapeError("probability maps disagree on class count");
        if (!m.geometry.approx_equal(first.geometry))
            throw ShapeError("probability maps disagree on geometry");
    }

    ProbabilityVolume out;
    out.geometry = first.geometry;
    out.classes = first.classes;
    out.probs.assign(first.probs.size(), 0.0);
    for (const auto& m : maps)
        for (std::size_t idx = 0; idx < out.probs.size(); ++idx) out.probs[idx] += m.probs[idx];
    const double inv = 1.0 / double(maps.size());
    for (auto& p : out.probs) p *= inv;
    out.validate();
    return out;
}

LabelMap argmax_labels(const ProbabilityVolume& probs) {
    probs.validate();
    LabelMap out(probs.geometry, std::uint8_t{0});
    const std::int64_t n = probs.voxels();
    for (std::int64_t v = 0; v < n; ++v) {
        int best = 0;
        double best_p = probs.at(0, v);
        for (int c = 1; c < probs.classes; ++c) {
            const double p = probs.at(c, v);
            if (p > best_p) { // strict: ties keep the lowest index
                best_p = p;
                best = c;
            }
        }
        out.labels[static_cast<std::size_t>(v)] = static_cast<std::uint8_t>(best);
    }
    return out;
}

LabelMap majority_vote_labels(const std::vector<ProbabilityVolume>& maps) {
    if (maps.empty())
        throw EmptyInputError("majority_vote_labels needs at least one map");
    std::vector<LabelMap> votes;
    votes.reserve(maps.size());
    for (const auto& m : maps) votes.push_back(argmax_labels(m));
    for (const auto& v : votes)
        require_same_grid(v.geometry, votes.front().geometry, "majority vote");

    const int classes = maps.front().classes;
    LabelMap out(votes.front().geometry, std::uint8_t{0});
    std::vector<int> counts(static_cast<std::size_t>(classes));
    for (std::size_t v = 0; v < out.labels.size(); ++v) {
        std::fill(counts.begin(), counts.end(), 0);
        for (const auto& vote : votes) ++counts[vote.labels[v]];
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (counts[c] > counts[best]) best = c;
        out.labels[v] = static_cast<std::uint8_t>(best);
    }
    return out;
}

void write_probability_volume(const ProbabilityVolume& pv, const std::filesystem::path& prefix,
                              const std::vector<std::string>& class_names) {
    pv.validate();
    if (class_names.size() != static_cast<std::size_t>(pv.classes))
        throw ValidationError("need one class name per class");

    json sidecar;
    sidecar["classes"] = json::array();
    sidecar["files"] = json::array();
    const auto n = static_cast<std::size_t>(pv.voxels());
    for (int c = 0; c < pv.classes; ++c) {
        const std::string filename = prefix.filename().string() + "_class" + std::to_string(c) + ".nii.gz";
        const auto path = prefix.parent_path() / filename;
        std::vector<double> data(pv.probs.begin() + std::size_t(c) * n,
                                 pv.probs.begin() + std::size_t(c + 1) * n);
        // float32 on disk: round now so the simplex check tolerance applies
        // to what a reader will actually see
        for (auto& v : data) v = double(float(v));
        write_nifti(Volume3D(pv.geometry, std::move(data)), path, NiftiDtype::float32);
        sidecar["classes"].push_back({{"id", c}, {"name", class_names[c]}});
        sidecar["files"].push_back(filename);
    }

    const auto sidecar_path = prefix.parent_path() / (prefix.filename().string() + "_probs.json");
    std::ofstream out(sidecar_path);
    if (!out)
        throw IoError("cannot write sidecar: " + sidecar_path.string());
    out << sidecar.dump(2) << "\n";
}

ProbabilityVolume read_probability_volume(const std::filesystem::path& sidecar_path) {
    std::ifstream in(sidecar_path);
    if (!in)
        throw IoError("cannot open sidecar: " + sidecar_path.string());
    json sidecar;
    try {
        in >> sidecar;
    } catch (const json::exception& e) {
        throw FormatError(std::string("sidecar parse error: ") + e.what());
    }
    const auto files = sidecar.at("files").get<std::vector<std::string>>();
    if (files.empty())
        throw FormatError("sidecar lists no class files");

    ProbabilityVolume pv;
    pv.classes = static_cast<int>(files.size());
    for (int c = 0; c < pv.classes; ++c) {
        const Volume3D vol = read_volume(sidecar_path.parent_path() / files[static_cast<std::size_t>(c)]);
        if (c == 0) {
            pv.geometry = vol.geometry;
            pv.probs.resize(vol.data.size() * static_cast<std::size_t>(pv.classes));
        } else if (!vol.geometry.approx_equal(pv.geometry)) {
            throw ShapeError("class volumes disagree on geometry");
        }
        std::copy(vol.data.begin(), vol.data.end(),
                  pv.probs.begin() + std::size_t(c) * vol.data.size());
    }
    pv.validate();
    return pv;
}

} // namespace petseg
