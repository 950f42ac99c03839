#ifndef PETSEG_VOLUME_HPP
#define PETSEG_VOLUME_HPP

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "petseg/errors.hpp"
#include "petseg/geometry.hpp"

namespace petseg {

// Flat storage convention used everywhere in the toolkit: axis 0 (i) is the
// fastest-varying axis, matching the NIfTI on-disk order.
inline std::int64_t flat_index(const Index3& dims, std::int64_t i, std::int64_t j, std::int64_t k) {
    return i + dims[0] * (j + dims[1] * k);
}

// A 3D scalar field over a physical grid. Values are 64-bit reals; CT HU,
// PET intensity and class probabilities all use this type.
struct Volume3D {
    Geometry geometry;
    std::vector<double> data;

    Volume3D() = default;
    Volume3D(Geometry g, std::vector<double> values) : geometry(g), data(std::move(values)) {
        validate();
    }
    Volume3D(Geometry g, double fill_value) : geometry(g) {
        geometry.validate();
        data.assign(static_cast<std::size_t>(geometry.voxel_count()), fill_value);
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return data[static_cast<std::size_t>(flat_index(geometry.dims, i, j, k))];
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data[static_cast<std::size_t>(flat_index(geometry.dims, i, j, k))];
    }

    void validate() const {
        geometry.validate();
        if (static_cast<std::int64_t>(data.size()) != geometry.voxel_count())
            throw ValidationError("volume data length does not match dims product");
        for (double v : data)
            if (!std::isfinite(v))
                throw ValidationError("volume contains non-finite values");
    }
};

// A volume whose voxels are small integer class ids under a LabelSchema.
struct LabelMap {
    Geometry geometry;
    std::vector<std::uint8_t> labels;

    LabelMap() = default;
    LabelMap(Geometry g, std::vector<std::uint8_t> values) : geometry(g), labels(std::move(values)) {
        validate();
    }
    LabelMap(Geometry g, std::uint8_t fill_value) : geometry(g) {
        geometry.validate();
        labels.assign(static_cast<std::size_t>(geometry.voxel_count()), fill_value);
    }

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    std::uint8_t& at(std::int64_t i, std::int64_t j, std::int64_t k) {
        return labels[static_cast<std::size_t>(flat_index(geometry.dims, i, j, k))];
    }
    std::uint8_t at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return labels[static_cast<std::size_t>(flat_index(geometry.dims, i, j, k))];
    }

    bool is_binary() const {
        for (auto v : labels)
            if (v > 1) return false;
        return true;
    }

    std::int64_t foreground_count() const {
        std::int64_t n = 0;
        for (auto v : labels) n += (v != 0);
        return n;
    }

    void validate() const {
        geometry.validate();
        if (static_cast<std::int64_t>(labels.size()) != geometry.voxel_count())
            throw ValidationError("label data length does not match dims product");
    }
};

inline void require_same_grid(const Geometry& a, const Geometry& b, const char* what) {
    if (!a.approx_equal(b))
        throw GridError(std::string(what) + ": geometries do not match");
}

} // namespace petseg

#endif
