#ifndef PETSEG_AUGMENT_HPP
#define PETSEG_AUGMENT_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "petseg/volume.hpp"

namespace petseg {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool well_ordered() const { return lo <= hi; }
};

// Training-time augmentation parameters: rotations, isotropic scaling,
// elastic deformation, gamma correction and mirroring. Defaults are toolkit
// choices (rotation ±30°, scale [0.7, 1.4], gamma [0.7, 1.5]).
struct AugmentationSpec {
    std::array<Range, 3> rotation_deg{Range{-30.0, 30.0}, Range{-30.0, 30.0}, Range{-30.0, 30.0}};
    double p_rotation = 0.0;

    Range scale{0.7, 1.4};
    double p_scale = 0.0;

    Range elastic_amplitude_mm{0.0, 4.0};
    double elastic_sigma_mm = 6.0;
    double elastic_control_spacing_mm = 8.0;
    double p_elastic = 0.0;

    Range gamma{0.7, 1.5};
    double p_gamma = 0.0;

    std::vector<int> mirror_axes; // subset of {0,1,2}
    double p_mirror = 0.0;        // applied per axis

    void validate() const;
    bool all_disabled() const {
        return p_rotation == 0.0 && p_scale == 0.0 && p_elastic == 0.0 && p_gamma == 0.0 &&
               p_mirror == 0.0;
    }

    static AugmentationSpec disabled() { return AugmentationSpec{}; }
};

// Concrete draws for one application of the spec, reproducible from the seed
// that produced them.
struct SampledTransform {
    std::uint64_t seed = 0;
    std::array<bool, 3> mirror{false, false, false};
    std::array<double, 3> rotation_rad{0.0, 0.0, 0.0};
    double scale = 1.0;
    bool elastic = false;
    double elastic_amplitude_mm = 0.0;
    double elastic_sigma_mm = 0.0;
    double elastic_control_spacing_mm = 0.0;
    std::uint64_t elastic_field_seed = 0; // the voxel field is regenerated from this
    double gamma = 1.0;

    bool is_identity() const;
    bool is_pure_mirror() const;
};

// Draws every parameter from its range with the toolkit's splitmix64 RNG.
SampledTransform sample_transform(const AugmentationSpec& spec, std::uint64_t seed);

// Applies the sampled transform: the spatial parts (mirror, then rotation
// about the volume center, then isotropic scale, then elastic displacement)
// compose into a single warp resampled once — trilinear for the image,
// nearest for labels. Gamma maps the image as x -> ((x-min)/(max-min))^g
// rescaled back. The identity transform returns its inputs bit-exactly.
std::pair<Volume3D, LabelMap> apply_transform(const Volume3D& image, const LabelMap& labels,
                                              const SampledTransform& t);

// Same warp applied to several aligned channels (gamma per channel).
std::pair<std::vector<Volume3D>, LabelMap> apply_transform_multi(
    const std::vector<Volume3D>& channels, const LabelMap& labels, const SampledTransform& t);

} // namespace petseg

#endif
