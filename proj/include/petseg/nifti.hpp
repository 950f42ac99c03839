#ifndef PETSEG_NIFTI_HPP
#define PETSEG_NIFTI_HPP

#include <filesystem>
#include <string>

#include "petseg/volume.hpp"

namespace petseg {

// Supported NIfTI-1 datatype codes.
enum class NiftiDtype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    int32 = 8,
    float32 = 16,
    float64 = 64,
};

// Which header fields supplied the geometry of a loaded file.
enum class GeometrySource { sform, qform, pixdim };

const char* to_string(GeometrySource s);
const char* to_string(NiftiDtype d);

struct NiftiReadResult {
    Volume3D volume;
    NiftiDtype dtype;
    GeometrySource geometry_source;
    bool was_gzipped = false;

    bool is_integer_dtype() const {
        return dtype == NiftiDtype::uint8 || dtype == NiftiDtype::int16 || dtype == NiftiDtype::int32;
    }
};

// Reads a single-file NIfTI-1 volume (.nii or .nii.gz). Geometry comes from
// the sform when sform_code > 0, else the qform when qform_code > 0, else
// axis-aligned from pixdim. scl_slope/scl_inter are applied when slope != 0.
NiftiReadResult read_nifti(const std::filesystem::path& path);

Volume3D read_volume(const std::filesystem::path& path);

// Reads a file whose voxels must be integers in [0, 255].
LabelMap read_label_map(const std::filesystem::path& path);

// Writes a NIfTI-1 file with the sform set from the geometry, scl_slope=1,
// scl_inter=0. Paths ending in .gz are gzip-compressed (with a fixed gzip
// header so output bytes are reproducible). Values that the requested dtype
// cannot represent raise RangeError.
void write_nifti(const Volume3D& volume, const std::filesystem::path& path,
                 NiftiDtype dtype = NiftiDtype::float32);
void write_nifti(const LabelMap& labels, const std::filesystem::path& path);

} // namespace petseg

#endif
