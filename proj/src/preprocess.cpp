#include "petseg/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace petseg {

Vec3 world_from_index(const Geometry& geometry, const Vec3& ijk) {
    const Vec3 scaled{ijk[0] * geometry.spacing[0], ijk[1] * geometry.spacing[1],
                      ijk[2] * geometry.spacing[2]};
    const Vec3 rotated = mat_vec(geometry.direction, scaled);
    return {geometry.origin[0] + rotated[0], geometry.origin[1] + rotated[1],
            geometry.origin[2] + rotated[2]};
}

Vec3 index_from_world(const Geometry& geometry, const Vec3& xyz) {
    const Vec3 rel{xyz[0] - geometry.origin[0], xyz[1] - geometry.origin[1],
                   xyz[2] - geometry.origin[2]};
    const Vec3 scaled = mat_tvec(geometry.direction, rel);
    return {scaled[0] / geometry.spacing[0], scaled[1] / geometry.spacing[1],
            scaled[2] / geometry.spacing[2]};
}

namespace {

// Trilinear sample at continuous index u; support is the voxel-center hull.
bool sample_trilinear(const Volume3D& src, const Vec3& u, double& out) {
    const auto& d = src.geometry.dims;
    for (int axis = 0; axis < 3; ++axis)
        if (u[axis] < 0.0 || u[axis] > double(d[axis] - 1))
            return false;

    std::int64_t i0[3];
    double f[3];
    for (int axis = 0; axis < 3; ++axis) {
        double fl = std::floor(u[axis]);
        std::int64_t idx = static_cast<std::int64_t>(fl);
        if (idx > d[axis] - 2) idx = d[axis] - 2; // u == dims-1: use last cell with frac 1
        if (idx < 0) idx = 0;                     // single-voxel axis
        i0[axis] = idx;
        f[axis] = u[axis] - double(idx);
    }

    double accum = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
        const int ci = corner & 1, cj = (corner >> 1) & 1, ck = (corner >> 2) & 1;
        const double w = (ci ? f[0] : 1.0 - f[0]) * (cj ? f[1] : 1.0 - f[1]) * (ck ? f[2] : 1.0 - f[2]);
        if (w == 0.0) continue;
        std::int64_t i = std::min<std::int64_t>(i0[0] + ci, d[0] - 1);
        std::int64_t j = std::min<std::int64_t>(i0[1] + cj, d[1] - 1);
        std::int64_t k = std::min<std::int64_t>(i0[2] + ck, d[2] - 1);
        accum += w * src.at(i, j, k);
    }
    out = accum;
    return true;
}

bool nearest_index(const Geometry& g, const Vec3& u, Index3& out) {
    for (int axis = 0; axis < 3; ++axis) {
        const std::int64_t r = static_cast<std::int64_t>(std::llround(u[axis]));
        if (r < 0 || r >= g.dims[axis]) return false;
        out[axis] = r;
    }
    return true;
}

} // namespace

Volume3D resample_to_grid(const Volume3D& src, const Geometry& target,
                          InterpolationMode mode, double fill) {
    src.validate();
    target.validate();

    Volume3D out(target, fill);
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < target.dims[2]; ++k)
        for (std::int64_t j = 0; j < target.dims[1]; ++j)
            for (std::int64_t i = 0; i < target.dims[0]; ++i, ++cursor) {
                const Vec3 world = world_from_index(target, {double(i), double(j), double(k)});
                const Vec3 u = index_from_world(src.geometry, world);
                if (mode == InterpolationMode::trilinear) {
                    double v;
                    if (sample_trilinear(src, u, v)) out.data[cursor] = v;
                } else {
                    Index3 idx;
                    if (nearest_index(src.geometry, u, idx))
                        out.data[cursor] = src.at(idx[0], idx[1], idx[2]);
                }
            }
    return out;
}

LabelMap resample_labels_to_grid(const LabelMap& src, const Geometry& target, std::uint8_t fill) {
    src.validate();
    target.validate();

    LabelMap out(target, fill);
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < target.dims[2]; ++k)
        for (std::int64_t j = 0; j < target.dims[1]; ++j)
            for (std::int64_t i = 0; i < target.dims[0]; ++i, ++cursor) {
                const Vec3 world = world_from_index(target, {double(i), double(j), double(k)});
                const Vec3 u = index_from_world(src.geometry, world);
                Index3 idx;
                if (nearest_index(src.geometry, u, idx))
                    out.labels[cursor] = src.at(idx[0], idx[1], idx[2]);
            }
    return out;
}

Volume3D normalize_ct(const Volume3D& vol, const NormalizationSpec& spec) {
    vol.validate();
    spec.validate();

    Volume3D out = vol;
    for (double& v : out.data) v = std::clamp(v, spec.clip_lo, spec.clip_hi);

    if (spec.mode == NormalizationSpec::Mode::none)
        return out;

    const double n = double(out.data.size());
    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : out.data) var += (v - mean) * (v - mean);
    var /= n; // population variance
    const double std_dev = std::sqrt(var);

    if (std_dev < 1e-8) {
        std::fill(out.data.begin(), out.data.end(), 0.0);
        return out;
    }
    for (double& v : out.data) v = (v - mean) / std_dev;
    return out;
}

namespace {

Geometry patch_geometry(const Geometry& g, const Index3& corner, const Index3& size) {
    Geometry out = g;
    out.dims = size;
    const Vec3 world = world_from_index(g, {double(corner[0]), double(corner[1]), double(corner[2])});
    out.origin = world;
    return out;
}

} // namespace

Volume3D extract_patch(const Volume3D& vol, const Index3& corner, const Index3& size,
                       double pad_value) {
    vol.validate();
    for (int axis = 0; axis < 3; ++axis)
        if (size[axis] < 1)
            throw ValidationError("patch size must be positive");

    Volume3D out(patch_geometry(vol.geometry, corner, size), pad_value);
    const auto& d = vol.geometry.dims;
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < size[2]; ++k)
        for (std::int64_t j = 0; j < size[1]; ++j)
            for (std::int64_t i = 0; i < size[0]; ++i, ++cursor) {
                const std::int64_t si = corner[0] + i, sj = corner[1] + j, sk = corner[2] + k;
                if (si >= 0 && si < d[0] && sj >= 0 && sj < d[1] && sk >= 0 && sk < d[2])
                    out.data[cursor] = vol.at(si, sj, sk);
            }
    return out;
}

LabelMap extract_label_patch(const LabelMap& vol, const Index3& corner, const Index3& size,
                             std::uint8_t pad_value) {
    vol.validate();
    for (int axis = 0; axis < 3; ++axis)
        if (size[axis] < 1)
            throw ValidationError("patch size must be positive");

    LabelMap out(patch_geometry(vol.geometry, corner, size), pad_value);
    const auto& d = vol.geometry.dims;
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < size[2]; ++k)
        for (std::int64_t j = 0; j < size[1]; ++j)
            for (std::int64_t i = 0; i < size[0]; ++i, ++cursor) {
                const std::int64_t si = corner[0] + i, sj = corner[1] + j, sk = corner[2] + k;
                if (si >= 0 && si < d[0] && sj >= 0 && sj < d[1] && sk >= 0 && sk < d[2])
                    out.labels[cursor] = vol.at(si, sj, sk);
            }
    return out;
}

} // namespace petseg
