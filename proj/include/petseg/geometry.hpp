#ifndef PETSEG_GEOMETRY_HPP
#define PETSEG_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstdint>

#include "petseg/errors.hpp"

namespace petseg {

using Index3 = std::array<std::int64_t, 3>;
using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>; // row-major; columns are axis direction vectors

// Voxel-to-world mapping: world = origin + direction * (ijk * spacing),
// where * on vectors is elementwise. Direction columns are unit length and
// mutually orthogonal.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};
    Mat3 direction{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (dims[a] < 1)
                throw ValidationError("geometry dims must be >= 1");
            if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
                throw ValidationError("geometry spacing must be positive and finite");
            if (!std::isfinite(origin[a]))
                throw ValidationError("geometry origin must be finite");
        }
        // columns unit-length and mutually orthogonal within 1e-6
        for (int c = 0; c < 3; ++c) {
            double norm2 = 0.0;
            for (int r = 0; r < 3; ++r) norm2 += direction[r][c] * direction[r][c];
            if (std::fabs(norm2 - 1.0) > 1e-6)
                throw ValidationError("geometry direction column not unit length");
        }
        for (int c1 = 0; c1 < 3; ++c1)
            for (int c2 = c1 + 1; c2 < 3; ++c2) {
                double dot = 0.0;
                for (int r = 0; r < 3; ++r) dot += direction[r][c1] * direction[r][c2];
                if (std::fabs(dot) > 1e-6)
                    throw ValidationError("geometry direction columns not orthogonal");
            }
    }

    bool approx_equal(const Geometry& other, double tol = 1e-6) const {
        if (dims != other.dims) return false;
        for (int a = 0; a < 3; ++a) {
            if (std::fabs(spacing[a] - other.spacing[a]) > tol) return false;
            if (std::fabs(origin[a] - other.origin[a]) > tol) return false;
            for (int b = 0; b < 3; ++b)
                if (std::fabs(direction[a][b] - other.direction[a][b]) > tol) return false;
        }
        return true;
    }
};

inline Vec3 mat_vec(const Mat3& m, const Vec3& v) {
    Vec3 out{};
    for (int r = 0; r < 3; ++r)
        out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
    return out;
}

// Orthonormal direction matrices invert by transposition.
inline Vec3 mat_tvec(const Mat3& m, const Vec3& v) {
    Vec3 out{};
    for (int c = 0; c < 3; ++c)
        out[c] = m[0][c] * v[0] + m[1][c] * v[1] + m[2][c] * v[2];
    return out;
}

inline double voxel_volume_ml(const Geometry& g) {
    return g.spacing[0] * g.spacing[1] * g.spacing[2] / 1000.0;
}

} // namespace petseg

#endif
