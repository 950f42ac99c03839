#include "petseg/net/synth.hpp"

#include <algorithm>
#include <cmath>

#include "petseg/rng.hpp"

namespace petseg::net {

namespace {

struct Ellipsoid {
    Vec3 center;   // voxel coords
    Vec3 semi_axes; // voxels
};

bool inside(const Ellipsoid& e, double i, double j, double k) {
    const double a = (i - e.center[0]) / e.semi_axes[0];
    const double b = (j - e.center[1]) / e.semi_axes[1];
    const double c = (k - e.center[2]) / e.semi_axes[2];
    return a * a + b * b + c * c <= 1.0;
}

bool overlaps(const Ellipsoid& e, const LabelMap& mask) {
    const auto& d = mask.geometry.dims;
    const std::int64_t i0 = std::max<std::int64_t>(0, std::int64_t(e.center[0] - e.semi_axes[0]) - 1);
    const std::int64_t i1 = std::min(d[0] - 1, std::int64_t(e.center[0] + e.semi_axes[0]) + 1);
    const std::int64_t j0 = std::max<std::int64_t>(0, std::int64_t(e.center[1] - e.semi_axes[1]) - 1);
    const std::int64_t j1 = std::min(d[1] - 1, std::int64_t(e.center[1] + e.semi_axes[1]) + 1);
    const std::int64_t k0 = std::max<std::int64_t>(0, std::int64_t(e.center[2] - e.semi_axes[2]) - 1);
    const std::int64_t k1 = std::min(d[2] - 1, std::int64_t(e.center[2] + e.semi_axes[2]) + 1);
    for (std::int64_t k = k0; k <= k1; ++k)
        for (std::int64_t j = j0; j <= j1; ++j)
            for (std::int64_t i = i0; i <= i1; ++i)
                if (mask.at(i, j, k) && inside(e, double(i), double(j), double(k))) return true;
    return false;
}

void paint_mask(const Ellipsoid& e, LabelMap& mask) {
    const auto& d = mask.geometry.dims;
    for (std::int64_t k = 0; k < d[2]; ++k)
        for (std::int64_t j = 0; j < d[1]; ++j)
            for (std::int64_t i = 0; i < d[0]; ++i)
                if (inside(e, double(i), double(j), double(k))) mask.at(i, j, k) = 1;
}

void paint_intensity(const Ellipsoid& e, Volume3D& vol, double value, double noise, Rng& rng) {
    const auto& d = vol.geometry.dims;
    for (std::int64_t k = 0; k < d[2]; ++k)
        for (std::int64_t j = 0; j < d[1]; ++j)
            for (std::int64_t i = 0; i < d[0]; ++i)
                if (inside(e, double(i), double(j), double(k)))
                    vol.at(i, j, k) = value + noise * (rng.next_double() - 0.5);
}

} // namespace

SyntheticStudy generate_synthetic_study(const Index3& size, int n_organs, int n_lesions,
                                        std::uint64_t seed) {
    for (auto s : size)
        if (s < 16)
            throw ValidationError("synthetic studies need at least 16 voxels per axis");
    if (n_organs < 0 || n_lesions < 0)
        throw ValidationError("organ and lesion counts must be nonnegative");

    Geometry geom;
    geom.dims = size;
    geom.spacing = {2.0, 2.0, 2.0};

    Rng rng(seed);
    SyntheticStudy study;
    study.pet = Volume3D(geom, 0.0);
    study.ct = Volume3D(geom, 0.0);
    study.lesion = LabelMap(geom, std::uint8_t{0});

    // PET background: dim with mild noise. CT: smooth low-frequency field.
    for (auto& v : study.pet.data) v = 0.05 + 0.02 * rng.next_double();
    {
        const Vec3 dimsf{double(size[0]), double(size[1]), double(size[2])};
        const double fx = rng.uniform(0.5, 1.5), fy = rng.uniform(0.5, 1.5), fz = rng.uniform(0.5, 1.5);
        const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28), pz = rng.uniform(0.0, 6.28);
        std::size_t cursor = 0;
        for (std::int64_t k = 0; k < size[2]; ++k)
            for (std::int64_t j = 0; j < size[1]; ++j)
                for (std::int64_t i = 0; i < size[0]; ++i, ++cursor)
                    study.ct.data[cursor] =
                        0.25 + 0.05 * std::sin(fx * 6.28 * i / dimsf[0] + px) *
                                   std::cos(fy * 6.28 * j / dimsf[1] + py) *
                                   std::cos(fz * 6.28 * k / dimsf[2] + pz) +
                        0.01 * (rng.next_double() - 0.5);
    }

    auto draw_center = [&](double margin_frac) {
        Vec3 c;
        for (int axis = 0; axis < 3; ++axis) {
            const double margin = margin_frac * double(size[axis]);
            c[axis] = rng.uniform(margin, double(size[axis]) - margin);
        }
        return c;
    };

    // Large bright organs with internal hotspots; intensity range chosen to
    // sit almost entirely inside the lesion range.
    for (int o = 0; o < n_organs; ++o) {
        Ellipsoid e;
        e.center = draw_center(0.25);
        for (int axis = 0; axis < 3; ++axis)
            e.semi_axes[axis] = std::max(2.0, rng.uniform(0.15, 0.26) * double(size[axis]));

        LabelMap mask(geom, std::uint8_t{0});
        paint_mask(e, mask);
        const double organ_intensity = rng.uniform(0.85, 1.05);
        paint_intensity(e, study.pet, organ_intensity, 0.30, rng);
        paint_intensity(e, study.ct, 0.38, 0.02, rng);

        const int n_hotspots = 1 + int(rng.next_below(2));
        for (int h = 0; h < n_hotspots; ++h) {
            Ellipsoid spot;
            for (int axis = 0; axis < 3; ++axis) {
                spot.center[axis] =
                    e.center[axis] + rng.uniform(-0.4, 0.4) * e.semi_axes[axis];
                spot.semi_axes[axis] = std::max(1.0, rng.uniform(0.03, 0.06) * double(size[axis]));
            }
            paint_intensity(spot, study.pet, rng.uniform(1.0, 1.15), 0.15, rng);
        }
        study.organs.push_back(std::move(mask));
    }

    // Small bright lesions, rejected away from organs so false positives on
    // organs are unambiguous.
    for (int l = 0; l < n_lesions; ++l) {
        Ellipsoid e;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            e.center = draw_center(0.12);
            for (int axis = 0; axis < 3; ++axis)
                e.semi_axes[axis] = std::max(1.2, rng.uniform(0.04, 0.08) * double(size[axis]));
            placed = true;
            for (const auto& organ : study.organs)
                if (overlaps(e, organ)) placed = false;
            if (placed && overlaps(e, study.lesion)) placed = false;
        }
        if (!placed) continue; // crowded volume; fewer lesions is acceptable
        paint_mask(e, study.lesion);
        paint_intensity(e, study.pet, rng.uniform(0.9, 1.1), 0.25, rng);
        paint_intensity(e, study.ct, 0.38, 0.02, rng);
    }

    return study;
}

} // namespace petseg::net
