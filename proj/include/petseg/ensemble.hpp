#ifndef PETSEG_ENSEMBLE_HPP
#define PETSEG_ENSEMBLE_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg {

// Per-voxel class probabilities, class-major layout: probs[c * voxels + v].
struct ProbabilityVolume {
    Geometry geometry;
    int classes = 0;
    std::vector<double> probs;

    std::int64_t voxels() const { return geometry.voxel_count(); }
    double at(int c, std::int64_t v) const {
        return probs[static_cast<std::size_t>(c) * static_cast<std::size_t>(voxels()) +
                     static_cast<std::size_t>(v)];
    }
    double& at(int c, std::int64_t v) {
        return probs[static_cast<std::size_t>(c) * static_cast<std::size_t>(voxels()) +
                     static_cast<std::size_t>(v)];
    }

    // nonnegative and summing to 1 within 1e-5 at every voxel
    void validate() const;
};

// Voxelwise arithmetic mean of per-fold probability maps.
ProbabilityVolume average_probabilities(const std::vector<ProbabilityVolume>& maps);

// Per voxel, the smallest class index achieving the maximum probability.
LabelMap argmax_labels(const ProbabilityVolume& probs);

// Alternative ensembling mode: hard-label majority vote over the per-fold
// argmax maps; ties go to the lowest class id.
LabelMap majority_vote_labels(const std::vector<ProbabilityVolume>& maps);

// On-disk form: one float32 NIfTI per class named <prefix>_class{k}.nii.gz
// plus a JSON sidecar <prefix>_probs.json naming the classes.
void write_probability_volume(const ProbabilityVolume& pv, const std::filesystem::path& prefix,
                              const std::vector<std::string>& class_names);
ProbabilityVolume read_probability_volume(const std::filesystem::path& sidecar_path);

} // namespace petseg

#endif
