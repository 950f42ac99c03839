#include "petseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include "petseg/preprocess.hpp"
#include "petseg/rng.hpp"

namespace petseg {

void AugmentationSpec::validate() const {
    for (const auto& r : rotation_deg)
        if (!r.well_ordered()) throw ValidationError("rotation range not well ordered");
    if (!scale.well_ordered() || scale.lo <= 0.0)
        throw ValidationError("scale range must be well ordered and positive");
    if (!elastic_amplitude_mm.well_ordered() || elastic_amplitude_mm.lo < 0.0)
        throw ValidationError("elastic amplitude range must be well ordered and nonnegative");
    if (elastic_sigma_mm <= 0.0 || elastic_control_spacing_mm <= 0.0)
        throw ValidationError("elastic smoothing and control spacing must be positive");
    if (!(gamma.lo > 0.0) || !gamma.well_ordered())
        throw ValidationError("gamma range must be positive and well ordered");
    for (double p : {p_rotation, p_scale, p_elastic, p_gamma, p_mirror})
        if (p < 0.0 || p > 1.0)
            throw ValidationError("apply probabilities must lie in [0, 1]");
    for (int axis : mirror_axes)
        if (axis < 0 || axis > 2)
            throw ValidationError("mirror axes must be in {0, 1, 2}");
}

bool SampledTransform::is_identity() const {
    return !mirror[0] && !mirror[1] && !mirror[2] && rotation_rad[0] == 0.0 &&
           rotation_rad[1] == 0.0 && rotation_rad[2] == 0.0 && scale == 1.0 &&
           (!elastic || elastic_amplitude_mm == 0.0) && gamma == 1.0;
}

bool SampledTransform::is_pure_mirror() const {
    return (mirror[0] || mirror[1] || mirror[2]) && rotation_rad[0] == 0.0 &&
           rotation_rad[1] == 0.0 && rotation_rad[2] == 0.0 && scale == 1.0 &&
           (!elastic || elastic_amplitude_mm == 0.0);
}

SampledTransform sample_transform(const AugmentationSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SampledTransform t;
    t.seed = seed;

    // Draw order is fixed; every branch consumes the same number of draws so
    // a parameter's value never depends on whether another one fired.
    for (int axis = 0; axis < 3; ++axis) {
        const bool flip_here =
            std::find(spec.mirror_axes.begin(), spec.mirror_axes.end(), axis) != spec.mirror_axes.end();
        const double u = rng.next_double();
        t.mirror[axis] = flip_here && u < spec.p_mirror;
    }

    const bool rotate = rng.next_double() < spec.p_rotation;
    for (int axis = 0; axis < 3; ++axis) {
        const double deg = rng.uniform(spec.rotation_deg[axis].lo, spec.rotation_deg[axis].hi);
        if (rotate) t.rotation_rad[axis] = deg * (3.14159265358979323846 / 180.0);
    }

    const bool scale = rng.next_double() < spec.p_scale;
    const double s = rng.uniform(spec.scale.lo, spec.scale.hi);
    if (scale) t.scale = s;

    t.elastic = rng.next_double() < spec.p_elastic;
    const double amp = rng.uniform(spec.elastic_amplitude_mm.lo, spec.elastic_amplitude_mm.hi);
    t.elastic_field_seed = rng.next_u64();
    if (t.elastic) {
        t.elastic_amplitude_mm = amp;
        t.elastic_sigma_mm = spec.elastic_sigma_mm;
        t.elastic_control_spacing_mm = spec.elastic_control_spacing_mm;
    }

    const bool gamma = rng.next_double() < spec.p_gamma;
    const double g = rng.uniform(spec.gamma.lo, spec.gamma.hi);
    if (gamma) t.gamma = g;

    return t;
}

namespace {

// Smoothed random displacement field, one Vec3 per voxel of `geom`. Drawn
// i.i.d. uniform in [-amp, amp] per control-grid point, Gaussian-smoothed
// with sigma in mm, trilinearly upsampled to the voxel grid.
std::vector<Vec3> elastic_field(const Geometry& geom, const SampledTransform& t) {
    const double ctrl_mm = t.elastic_control_spacing_mm;
    Index3 ctrl_dims;
    Vec3 ctrl_spacing;
    for (int axis = 0; axis < 3; ++axis) {
        const double extent_mm = double(geom.dims[axis]) * geom.spacing[axis];
        ctrl_dims[axis] = std::max<std::int64_t>(2, std::int64_t(std::ceil(extent_mm / ctrl_mm)) + 1);
        ctrl_spacing[axis] = extent_mm / double(ctrl_dims[axis] - 1);
    }

    const std::size_t n_ctrl =
        static_cast<std::size_t>(ctrl_dims[0] * ctrl_dims[1] * ctrl_dims[2]);
    std::array<std::vector<double>, 3> field;
    Rng rng(t.elastic_field_seed);
    for (auto& comp : field) {
        comp.resize(n_ctrl);
        for (auto& v : comp) v = rng.uniform(-t.elastic_amplitude_mm, t.elastic_amplitude_mm);
    }

    // separable Gaussian smoothing on the control grid
    for (int axis = 0; axis < 3; ++axis) {
        const double sigma_cells = t.elastic_sigma_mm / ctrl_spacing[axis];
        const int radius = std::max(1, int(std::ceil(3.0 * sigma_cells)));
        std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
        double norm = 0.0;
        for (int o = -radius; o <= radius; ++o) {
            const double w = std::exp(-0.5 * (o / sigma_cells) * (o / sigma_cells));
            kernel[static_cast<std::size_t>(o + radius)] = w;
            norm += w;
        }
        for (auto& w : kernel) w /= norm;

        for (auto& comp : field) {
            std::vector<double> next(n_ctrl, 0.0);
            for (std::int64_t k = 0; k < ctrl_dims[2]; ++k)
                for (std::int64_t j = 0; j < ctrl_dims[1]; ++j)
                    for (std::int64_t i = 0; i < ctrl_dims[0]; ++i) {
                        double acc = 0.0;
                        for (int o = -radius; o <= radius; ++o) {
                            std::int64_t c[3] = {i, j, k};
                            c[axis] = std::clamp<std::int64_t>(c[axis] + o, 0, ctrl_dims[axis] - 1);
                            acc += kernel[static_cast<std::size_t>(o + radius)] *
                                   comp[static_cast<std::size_t>(flat_index(ctrl_dims, c[0], c[1], c[2]))];
                        }
                        next[static_cast<std::size_t>(flat_index(ctrl_dims, i, j, k))] = acc;
                    }
            comp = std::move(next);
        }
    }

    // trilinear upsample to the voxel grid
    std::vector<Vec3> out(static_cast<std::size_t>(geom.voxel_count()));
    std::size_t cursor = 0;
    for (std::int64_t k = 0; k < geom.dims[2]; ++k)
        for (std::int64_t j = 0; j < geom.dims[1]; ++j)
            for (std::int64_t i = 0; i < geom.dims[0]; ++i, ++cursor) {
                const double pos[3] = {double(i) * geom.spacing[0] / ctrl_spacing[0],
                                       double(j) * geom.spacing[1] / ctrl_spacing[1],
                                       double(k) * geom.spacing[2] / ctrl_spacing[2]};
                std::int64_t c0[3];
                double f[3];
                for (int axis = 0; axis < 3; ++axis) {
                    const double clamped = std::clamp(pos[axis], 0.0, double(ctrl_dims[axis] - 1));
                    std::int64_t idx = std::int64_t(std::floor(clamped));
                    idx = std::min(idx, ctrl_dims[axis] - 2);
                    c0[axis] = idx;
                    f[axis] = clamped - double(idx);
                }
                for (int comp = 0; comp < 3; ++comp) {
                    double acc = 0.0;
                    for (int corner = 0; corner < 8; ++corner) {
                        const int ci = corner & 1, cj = (corner >> 1) & 1, ck = (corner >> 2) & 1;
                        const double w = (ci ? f[0] : 1 - f[0]) * (cj ? f[1] : 1 - f[1]) *
                                         (ck ? f[2] : 1 - f[2]);
                        acc += w * field[comp][static_cast<std::size_t>(
                                   flat_index(ctrl_dims, c0[0] + ci, c0[1] + cj, c0[2] + ck))];
                    }
                    out[cursor][comp] = acc;
                }
            }
    return out;
}

Mat3 rotation_matrix(const std::array<double, 3>& angles) {
    const double cx = std::cos(angles[0]), sx = std::sin(angles[0]);
    const double cy = std::cos(angles[1]), sy = std::sin(angles[1]);
    const double cz = std::cos(angles[2]), sz = std::sin(angles[2]);
    const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
    const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
    const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
    auto mul = [](const Mat3& a, const Mat3& b) {
        Mat3 m{};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                for (int t = 0; t < 3; ++t) m[r][c] += a[r][t] * b[t][c];
        return m;
    };
    return mul(rz, mul(ry, rx)); // content rotates by Rz * Ry * Rx
}

Volume3D gamma_correct(const Volume3D& image, double gamma) {
    if (gamma == 1.0) return image;
    double lo = image.data[0], hi = image.data[0];
    for (double v : image.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) return image;
    Volume3D out = image;
    const double span = hi - lo;
    for (double& v : out.data) v = lo + span * std::pow((v - lo) / span, gamma);
    return out;
}

template <typename MirrorOnly>
void mirror_flip(const Index3& dims, MirrorOnly&& assign, const std::array<bool, 3>& mirror) {
    for (std::int64_t k = 0; k < dims[2]; ++k)
        for (std::int64_t j = 0; j < dims[1]; ++j)
            for (std::int64_t i = 0; i < dims[0]; ++i) {
                const std::int64_t si = mirror[0] ? dims[0] - 1 - i : i;
                const std::int64_t sj = mirror[1] ? dims[1] - 1 - j : j;
                const std::int64_t sk = mirror[2] ? dims[2] - 1 - k : k;
                assign(flat_index(dims, i, j, k), flat_index(dims, si, sj, sk));
            }
}

} // namespace

std::pair<std::vector<Volume3D>, LabelMap> apply_transform_multi(
    const std::vector<Volume3D>& channels, const LabelMap& labels, const SampledTransform& t) {
    if (channels.empty())
        throw EmptyInputError("apply_transform needs at least one image channel");
    for (const auto& ch : channels)
        require_same_grid(ch.geometry, labels.geometry, "apply_transform");

    if (t.is_identity())
        return {channels, labels};

    const Geometry& geom = labels.geometry;
    std::vector<Volume3D> out_channels = channels;
    LabelMap out_labels = labels;

    const bool spatial_identity = !t.mirror[0] && !t.mirror[1] && !t.mirror[2] &&
                                  t.rotation_rad[0] == 0.0 && t.rotation_rad[1] == 0.0 &&
                                  t.rotation_rad[2] == 0.0 && t.scale == 1.0 &&
                                  (!t.elastic || t.elastic_amplitude_mm == 0.0);
    if (spatial_identity) {
        // gamma only; no resampling pass
    } else if (t.is_pure_mirror()) {
        // index flips are exact, which keeps the involution property bit-true
        for (std::size_t c = 0; c < channels.size(); ++c)
            mirror_flip(geom.dims,
                        [&](std::int64_t dst, std::int64_t src) {
                            out_channels[c].data[std::size_t(dst)] = channels[c].data[std::size_t(src)];
                        },
                        t.mirror);
        mirror_flip(geom.dims,
                    [&](std::int64_t dst, std::int64_t src) {
                        out_labels.labels[std::size_t(dst)] = labels.labels[std::size_t(src)];
                    },
                    t.mirror);
    } else {
        // one composed warp, sampled once per output voxel:
        // source = mirror(rot^-1(scale^-1(p + elastic(p))))
        const Vec3 center_index{double(geom.dims[0] - 1) / 2.0, double(geom.dims[1] - 1) / 2.0,
                                double(geom.dims[2] - 1) / 2.0};
        const Vec3 center_world = world_from_index(geom, center_index);
        const Mat3 rot = rotation_matrix(t.rotation_rad);
        const double inv_scale = 1.0 / t.scale;
        const bool use_elastic = t.elastic && t.elastic_amplitude_mm > 0.0;
        std::vector<Vec3> disp;
        if (use_elastic) disp = elastic_field(geom, t);

        std::size_t cursor = 0;
        for (std::int64_t k = 0; k < geom.dims[2]; ++k)
            for (std::int64_t j = 0; j < geom.dims[1]; ++j)
                for (std::int64_t i = 0; i < geom.dims[0]; ++i, ++cursor) {
                    Vec3 p = world_from_index(geom, {double(i), double(j), double(k)});
                    for (int axis = 0; axis < 3; ++axis) p[axis] -= center_world[axis];
                    if (use_elastic)
                        for (int axis = 0; axis < 3; ++axis) p[axis] += disp[cursor][axis];
                    for (int axis = 0; axis < 3; ++axis) p[axis] *= inv_scale;
                    // inverse rotation = transpose
                    Vec3 q = mat_tvec(rot, p);
                    for (int axis = 0; axis < 3; ++axis) q[axis] += center_world[axis];
                    Vec3 u = index_from_world(geom, q);
                    for (int axis = 0; axis < 3; ++axis)
                        if (t.mirror[axis]) u[axis] = double(geom.dims[axis] - 1) - u[axis];

                    // trilinear for image channels, clamped to the support
                    Vec3 uc = u;
                    for (int axis = 0; axis < 3; ++axis)
                        uc[axis] = std::clamp(uc[axis], 0.0, double(geom.dims[axis] - 1));
                    std::int64_t i0[3];
                    double f[3];
                    for (int axis = 0; axis < 3; ++axis) {
                        std::int64_t idx = std::int64_t(std::floor(uc[axis]));
                        idx = std::clamp<std::int64_t>(idx, 0, std::max<std::int64_t>(0, geom.dims[axis] - 2));
                        i0[axis] = idx;
                        f[axis] = uc[axis] - double(idx);
                    }
                    for (std::size_t c = 0; c < channels.size(); ++c) {
                        double acc = 0.0;
                        for (int corner = 0; corner < 8; ++corner) {
                            const int ci = corner & 1, cj = (corner >> 1) & 1, ck = (corner >> 2) & 1;
                            const double w = (ci ? f[0] : 1 - f[0]) * (cj ? f[1] : 1 - f[1]) *
                                             (ck ? f[2] : 1 - f[2]);
                            if (w == 0.0) continue;
                            acc += w * channels[c].at(std::min(i0[0] + ci, geom.dims[0] - 1),
                                                      std::min(i0[1] + cj, geom.dims[1] - 1),
                                                      std::min(i0[2] + ck, geom.dims[2] - 1));
                        }
                        out_channels[c].data[cursor] = acc;
                    }
                    // nearest for labels
                    Index3 nearest;
                    bool inside = true;
                    for (int axis = 0; axis < 3; ++axis) {
                        const std::int64_t r = std::int64_t(std::llround(u[axis]));
                        if (r < 0 || r >= geom.dims[axis]) {
                            inside = false;
                            break;
                        }
                        nearest[axis] = r;
                    }
                    out_labels.labels[cursor] =
                        inside ? labels.at(nearest[0], nearest[1], nearest[2]) : 0;
                }
    }

    if (t.gamma != 1.0)
        for (auto& ch : out_channels) ch = gamma_correct(ch, t.gamma);
    return {std::move(out_channels), std::move(out_labels)};
}

std::pair<Volume3D, LabelMap> apply_transform(const Volume3D& image, const LabelMap& labels,
                                              const SampledTransform& t) {
    auto [channels, out_labels] = apply_transform_multi({image}, labels, t);
    return {std::move(channels.front()), std::move(out_labels)};
}

} // namespace petseg
