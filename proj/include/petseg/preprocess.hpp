#ifndef PETSEG_PREPROCESS_HPP
#define PETSEG_PREPROCESS_HPP

#include "petseg/volume.hpp"

namespace petseg {

enum class InterpolationMode { trilinear, nearest };

struct NormalizationSpec {
    double clip_lo = -1024.0; // HU
    double clip_hi = 1024.0;  // HU
    enum class Mode { zscore_per_volume, none } mode = Mode::zscore_per_volume;

    void validate() const {
        if (!(clip_lo < clip_hi))
            throw ValidationError("normalization clip_lo must be < clip_hi");
    }
};

// world = origin + direction * (ijk * spacing), elementwise scale then rotate.
Vec3 world_from_index(const Geometry& geometry, const Vec3& ijk);

// Inverse mapping (direction is orthonormal, so its inverse is its transpose).
Vec3 index_from_world(const Geometry& geometry, const Vec3& xyz);

// Samples src at the world position of every target voxel. Positions outside
// the source support take `fill`. Trilinear support is the hull of voxel
// centers; nearest rounds and accepts anything within half a voxel of the
// grid. Nearest is mandatory for label maps.
Volume3D resample_to_grid(const Volume3D& src, const Geometry& target,
                          InterpolationMode mode, double fill);

LabelMap resample_labels_to_grid(const LabelMap& src, const Geometry& target,
                                 std::uint8_t fill = 0);

// Clips to [clip_lo, clip_hi], then optionally standardizes to zero mean and
// unit variance over the volume (population std). A volume with std below
// 1e-8 comes back all zeros.
Volume3D normalize_ct(const Volume3D& vol, const NormalizationSpec& spec);

// Copies the size-shaped block anchored at corner (which may lie outside the
// volume; such voxels are pad_value). The output geometry is translated so
// voxel (0,0,0) sits at the world position of `corner`.
Volume3D extract_patch(const Volume3D& vol, const Index3& corner, const Index3& size,
                       double pad_value);

LabelMap extract_label_patch(const LabelMap& vol, const Index3& corner, const Index3& size,
                             std::uint8_t pad_value = 0);

} // namespace petseg

#endif
