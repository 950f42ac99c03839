#include "petseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "petseg/rng.hpp"

namespace petseg {

using nlohmann::json;

Connectivity connectivity_from_int(int n) {
    switch (n) {
        case 6: return Connectivity::six;
        case 18: return Connectivity::eighteen;
        case 26: return Connectivity::twenty_six;
    }
    throw ValidationError("connectivity must be 6, 18 or 26");
}

namespace {

struct Offset {
    std::int64_t di, dj, dk;
};

std::vector<Offset> neighbor_offsets(Connectivity conn) {
    const int max_l1 = conn == Connectivity::six ? 1 : conn == Connectivity::eighteen ? 2 : 3;
    std::vector<Offset> offsets;
    for (std::int64_t dk = -1; dk <= 1; ++dk)
        for (std::int64_t dj = -1; dj <= 1; ++dj)
            for (std::int64_t di = -1; di <= 1; ++di) {
                const int l1 = int(std::llabs(di) + std::llabs(dj) + std::llabs(dk));
                if (l1 >= 1 && l1 <= max_l1) offsets.push_back({di, dj, dk});
            }
    return offsets;
}

void require_binary_mask(const LabelMap& m, const char* what) {
    if (!m.is_binary())
        throw ValidationError(std::string(what) + " must be a binary mask");
}

} // namespace

ComponentMap connected_components(const LabelMap& mask, Connectivity conn) {
    mask.validate();
    require_binary_mask(mask, "connected_components input");

    const auto& dims = mask.geometry.dims;
    const std::size_t n = mask.labels.size();
    const auto offsets = neighbor_offsets(conn);

    ComponentMap cm;
    cm.labels.assign(n, 0);

    std::vector<std::int64_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (!mask.labels[start] || cm.labels[start]) continue;
        ++cm.count;
        cm.labels[start] = cm.count;
        stack.push_back(static_cast<std::int64_t>(start));
        while (!stack.empty()) {
            const std::int64_t v = stack.back();
            stack.pop_back();
            const std::int64_t i = v % dims[0];
            const std::int64_t j = (v / dims[0]) % dims[1];
            const std::int64_t k = v / (dims[0] * dims[1]);
            for (const auto& o : offsets) {
                const std::int64_t ni = i + o.di, nj = j + o.dj, nk = k + o.dk;
                if (ni < 0 || ni >= dims[0] || nj < 0 || nj >= dims[1] || nk < 0 || nk >= dims[2])
                    continue;
                const std::int64_t nv = flat_index(dims, ni, nj, nk);
                if (mask.labels[nv] && !cm.labels[nv]) {
                    cm.labels[nv] = cm.count;
                    stack.push_back(nv);
                }
            }
        }
    }
    return cm;
}

double dice(const LabelMap& pred, const LabelMap& gt) {
    require_same_grid(pred.geometry, gt.geometry, "dice");
    require_binary_mask(pred, "dice pred");
    require_binary_mask(gt, "dice gt");

    std::int64_t p = 0, g = 0, both = 0;
    for (std::size_t v = 0; v < pred.labels.size(); ++v) {
        p += pred.labels[v];
        g += gt.labels[v];
        both += pred.labels[v] & gt.labels[v];
    }
    if (p + g == 0) return 1.0;
    return 2.0 * double(both) / double(p + g);
}

namespace {

// mL of `subject` components with zero overlap against `reference`
double untouched_component_volume(const LabelMap& subject, const LabelMap& reference,
                                  Connectivity conn) {
    require_same_grid(subject.geometry, reference.geometry, "component volume");
    require_binary_mask(subject, "mask");
    require_binary_mask(reference, "mask");

    const ComponentMap cm = connected_components(subject, conn);
    if (cm.count == 0) return 0.0;

    std::vector<std::int64_t> voxels(static_cast<std::size_t>(cm.count) + 1, 0);
    std::vector<char> touched(static_cast<std::size_t>(cm.count) + 1, 0);
    for (std::size_t v = 0; v < cm.labels.size(); ++v) {
        const std::int32_t c = cm.labels[v];
        if (!c) continue;
        ++voxels[c];
        if (reference.labels[v]) touched[c] = 1;
    }

    std::int64_t untouched = 0;
    for (std::int32_t c = 1; c <= cm.count; ++c)
        if (!touched[c]) untouched += voxels[c];
    return double(untouched) * voxel_volume_ml(subject.geometry);
}

} // namespace

double false_positive_volume(const LabelMap& pred, const LabelMap& gt, Connectivity conn) {
    return untouched_component_volume(pred, gt, conn);
}

double false_negative_volume(const LabelMap& pred, const LabelMap& gt, Connectivity conn) {
    return untouched_component_volume(gt, pred, conn);
}

namespace {

// Foreground voxels with a background 6-neighbor; the volume border counts
// as background.
std::vector<std::int64_t> boundary_voxels(const LabelMap& mask) {
    const auto& dims = mask.geometry.dims;
    std::vector<std::int64_t> out;
    for (std::size_t v = 0; v < mask.labels.size(); ++v) {
        if (!mask.labels[v]) continue;
        const std::int64_t i = static_cast<std::int64_t>(v) % dims[0];
        const std::int64_t j = (static_cast<std::int64_t>(v) / dims[0]) % dims[1];
        const std::int64_t k = static_cast<std::int64_t>(v) / (dims[0] * dims[1]);
        bool boundary = false;
        for (int axis = 0; axis < 3 && !boundary; ++axis)
            for (int dir = -1; dir <= 1 && !boundary; dir += 2) {
                std::int64_t c[3] = {i, j, k};
                c[axis] += dir;
                if (c[axis] < 0 || c[axis] >= dims[axis])
                    boundary = true; // border counts as background
                else if (!mask.labels[flat_index(dims, c[0], c[1], c[2])])
                    boundary = true;
            }
        if (boundary) out.push_back(static_cast<std::int64_t>(v));
    }
    return out;
}

// Distances between voxel centers: the direction matrix is orthonormal, so
// world distance reduces to sqrt(sum((d_index * spacing)^2)).
double center_distance_sq(const Index3& dims, const Vec3& spacing, std::int64_t a, std::int64_t b) {
    const std::int64_t ai = a % dims[0], aj = (a / dims[0]) % dims[1], ak = a / (dims[0] * dims[1]);
    const std::int64_t bi = b % dims[0], bj = (b / dims[0]) % dims[1], bk = b / (dims[0] * dims[1]);
    const double dx = double(ai - bi) * spacing[0];
    const double dy = double(aj - bj) * spacing[1];
    const double dz = double(ak - bk) * spacing[2];
    return dx * dx + dy * dy + dz * dz;
}

std::int64_t count_within_brute(const std::vector<std::int64_t>& from,
                                const std::vector<std::int64_t>& to, const Index3& dims,
                                const Vec3& spacing, double tol_sq) {
    std::int64_t hits = 0;
    for (auto a : from) {
        for (auto b : to) {
            if (center_distance_sq(dims, spacing, a, b) <= tol_sq) {
                ++hits;
                break;
            }
        }
    }
    return hits;
}

// Stand-in for +inf. Keeps the envelope arithmetic finite; any voxel left at
// this magnitude is beyond every realistic tolerance.
constexpr double kFarAway = 1e20;

// 1D lower-envelope pass of the squared Euclidean distance transform with a
// physical sample spacing h (Felzenszwalb & Huttenlocher).
void edt_pass_1d(std::vector<double>& f, double h, std::vector<double>& scratch_d,
                 std::vector<int>& scratch_v, std::vector<double>& scratch_z) {
    const int n = static_cast<int>(f.size());
    auto& d = scratch_d;
    auto& v = scratch_v;
    auto& z = scratch_z;
    d.resize(n);
    v.resize(n);
    z.resize(n + 1);

    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    const double h2 = h * h;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + h2 * q * q) - (f[v[k]] + h2 * double(v[k]) * double(v[k]))) /
                   (2.0 * h2 * double(q - v[k]));
        while (s <= z[k]) {
            --k;
            if (k < 0) break;
            s = ((f[q] + h2 * q * q) - (f[v[k]] + h2 * double(v[k]) * double(v[k]))) /
                (2.0 * h2 * double(q - v[k]));
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -std::numeric_limits<double>::infinity() : s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }

    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < double(q)) ++k;
        d[q] = h2 * double(q - v[k]) * double(q - v[k]) + f[v[k]];
    }
    f = d;
}

// Squared distance (world mm) from every voxel to the nearest seed voxel.
std::vector<double> squared_distance_transform(const Index3& dims, const Vec3& spacing,
                                               const std::vector<std::int64_t>& seeds) {
    const std::size_t n = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    std::vector<double> dist(n, kFarAway);
    for (auto s : seeds) dist[static_cast<std::size_t>(s)] = 0.0;

    std::vector<double> line, sd;
    std::vector<int> sv;
    std::vector<double> sz;

    // axis 0 (i): contiguous runs
    line.resize(static_cast<std::size_t>(dims[0]));
    for (std::int64_t k = 0; k < dims[2]; ++k)
        for (std::int64_t j = 0; j < dims[1]; ++j) {
            const std::int64_t base = flat_index(dims, 0, j, k);
            for (std::int64_t i = 0; i < dims[0]; ++i) line[i] = dist[base + i];
            edt_pass_1d(line, spacing[0], sd, sv, sz);
            for (std::int64_t i = 0; i < dims[0]; ++i) dist[base + i] = line[i];
        }
    // axis 1 (j)
    line.resize(static_cast<std::size_t>(dims[1]));
    for (std::int64_t k = 0; k < dims[2]; ++k)
        for (std::int64_t i = 0; i < dims[0]; ++i) {
            for (std::int64_t j = 0; j < dims[1]; ++j) line[j] = dist[flat_index(dims, i, j, k)];
            edt_pass_1d(line, spacing[1], sd, sv, sz);
            for (std::int64_t j = 0; j < dims[1]; ++j) dist[flat_index(dims, i, j, k)] = line[j];
        }
    // axis 2 (k)
    line.resize(static_cast<std::size_t>(dims[2]));
    for (std::int64_t j = 0; j < dims[1]; ++j)
        for (std::int64_t i = 0; i < dims[0]; ++i) {
            for (std::int64_t k = 0; k < dims[2]; ++k) line[k] = dist[flat_index(dims, i, j, k)];
            edt_pass_1d(line, spacing[2], sd, sv, sz);
            for (std::int64_t k = 0; k < dims[2]; ++k) dist[flat_index(dims, i, j, k)] = line[k];
        }
    return dist;
}

std::int64_t count_within_edt(const std::vector<std::int64_t>& from, const std::vector<double>& dist_sq_to_other,
                              double tol_sq) {
    std::int64_t hits = 0;
    for (auto a : from)
        if (dist_sq_to_other[static_cast<std::size_t>(a)] <= tol_sq) ++hits;
    return hits;
}

} // namespace

double surface_dice(const LabelMap& pred, const LabelMap& gt, double tolerance_mm,
                    SurfaceDistanceMethod method) {
    require_same_grid(pred.geometry, gt.geometry, "surface_dice");
    require_binary_mask(pred, "surface_dice pred");
    require_binary_mask(gt, "surface_dice gt");
    if (tolerance_mm < 0.0)
        throw ValidationError("surface dice tolerance must be >= 0");

    const bool pred_empty = pred.foreground_count() == 0;
    const bool gt_empty = gt.foreground_count() == 0;
    if (pred_empty && gt_empty) return 1.0;
    if (pred_empty != gt_empty) return 0.0;

    const auto bp = boundary_voxels(pred);
    const auto bg = boundary_voxels(gt);
    const auto& dims = pred.geometry.dims;
    const auto& spacing = pred.geometry.spacing;
    // add a hair of slack so exact-tolerance hits are not lost to rounding
    const double tol_sq = tolerance_mm * tolerance_mm * (1.0 + 1e-12);

    std::int64_t p_hits = 0, g_hits = 0;
    if (method == SurfaceDistanceMethod::brute_force) {
        p_hits = count_within_brute(bp, bg, dims, spacing, tol_sq);
        g_hits = count_within_brute(bg, bp, dims, spacing, tol_sq);
    } else {
        const auto dist_to_g = squared_distance_transform(dims, spacing, bg);
        const auto dist_to_p = squared_distance_transform(dims, spacing, bp);
        p_hits = count_within_edt(bp, dist_to_g, tol_sq);
        g_hits = count_within_edt(bg, dist_to_p, tol_sq);
    }
    return double(p_hits + g_hits) / double(bp.size() + bg.size());
}

CaseMetrics evaluate_case(const LabelMap& pred, const LabelMap& gt, const LabelSchema& schema,
                          const MetricParams& params) {
    require_same_grid(pred.geometry, gt.geometry, "evaluate_case");
    const LabelMap p = reduce_to_lesion(pred, schema);
    const LabelMap g = reduce_to_lesion(gt, schema);

    CaseMetrics m;
    m.dice = dice(p, g);
    m.fpv_ml = false_positive_volume(p, g, params.connectivity);
    m.fnv_ml = false_negative_volume(p, g, params.connectivity);
    if (params.compute_nsd)
        m.nsd = surface_dice(p, g, params.nsd_tolerance_mm);
    return m;
}

namespace {

AggregateStats aggregate(const std::vector<double>& values, double ci_level, int n_boot, Rng rng) {
    AggregateStats stats;
    const std::size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(n);
    stats.mean = mean;
    stats.std_dev = std::sqrt(var);

    std::vector<double> boot_means(static_cast<std::size_t>(n_boot));
    for (int b = 0; b < n_boot; ++b) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += values[rng.next_below(n)];
        boot_means[static_cast<std::size_t>(b)] = s / double(n);
    }
    std::sort(boot_means.begin(), boot_means.end());

    // linearly interpolated percentile of the sorted bootstrap means
    auto quantile = [&](double q) {
        const double pos = q * double(n_boot - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - double(lo);
        if (lo + 1 >= boot_means.size()) return boot_means.back();
        return boot_means[lo] * (1.0 - frac) + boot_means[lo + 1] * frac;
    };
    const double alpha = 1.0 - ci_level;
    stats.ci_lo = quantile(alpha / 2.0);
    stats.ci_hi = quantile(1.0 - alpha / 2.0);
    // guard against interpolation rounding placing the mean epsilon outside
    stats.ci_lo = std::min(stats.ci_lo, stats.mean);
    stats.ci_hi = std::max(stats.ci_hi, stats.mean);
    return stats;
}

json stats_to_json(const AggregateStats& s) {
    return {{"mean", s.mean}, {"std", s.std_dev}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}};
}

void format_double(std::string& out, double v);

} // namespace

MetricsReport summarize(std::vector<CaseMetrics> rows, double ci_level, int n_boot,
                        std::uint64_t seed) {
    if (rows.empty())
        throw EmptyInputError("summarize needs at least one case");
    if (!(ci_level > 0.0 && ci_level < 1.0))
        throw ValidationError("ci_level must be in (0, 1)");
    if (n_boot < 1)
        throw ValidationError("n_boot must be >= 1");

    std::sort(rows.begin(), rows.end(),
              [](const CaseMetrics& a, const CaseMetrics& b) { return a.study_id < b.study_id; });

    MetricsReport report;
    report.ci_level = ci_level;
    report.n_boot = n_boot;
    report.seed = seed;

    std::vector<double> dices, fpvs, fnvs, nsds;
    for (const auto& r : rows) {
        dices.push_back(r.dice);
        fpvs.push_back(r.fpv_ml);
        fnvs.push_back(r.fnv_ml);
        if (r.nsd) nsds.push_back(*r.nsd);
    }

    Rng rng(seed);
    report.dice = aggregate(dices, ci_level, n_boot, rng.fork(0));
    report.fpv_ml = aggregate(fpvs, ci_level, n_boot, rng.fork(1));
    report.fnv_ml = aggregate(fnvs, ci_level, n_boot, rng.fork(2));
    if (nsds.size() == rows.size())
        report.nsd = aggregate(nsds, ci_level, n_boot, rng.fork(3));
    report.rows = std::move(rows);
    return report;
}

std::string MetricsReport::to_json() const {
    json j;
    json jrows = json::array();
    for (const auto& r : rows) {
        json row{{"study_id", r.study_id}, {"dice", r.dice}, {"fpv_ml", r.fpv_ml}, {"fnv_ml", r.fnv_ml}};
        if (r.nsd)
            row["nsd"] = *r.nsd;
        else
            row["nsd"] = nullptr;
        jrows.push_back(row);
    }
    j["rows"] = jrows;
    json agg;
    agg["dice"] = stats_to_json(dice);
    agg["fpv_ml"] = stats_to_json(fpv_ml);
    agg["fnv_ml"] = stats_to_json(fnv_ml);
    if (nsd) agg["nsd"] = stats_to_json(*nsd);
    j["aggregates"] = agg;
    j["ci_method"] = ci_method;
    j["ci_level"] = ci_level;
    j["n_boot"] = n_boot;
    j["seed"] = seed;
    return j.dump(2) + "\n";
}

namespace {

void format_double(std::string& out, double v) {
    // shortest round-trip representation; stable across reruns
    out += json(v).dump();
}

} // namespace

std::string MetricsReport::to_csv() const {
    std::string out = "study_id,dice,fpv_ml,fnv_ml,nsd\n";
    for (const auto& r : rows) {
        out += r.study_id;
        out += ',';
        format_double(out, r.dice);
        out += ',';
        format_double(out, r.fpv_ml);
        out += ',';
        format_double(out, r.fnv_ml);
        out += ',';
        if (r.nsd) format_double(out, *r.nsd);
        out += '\n';
    }
    return out;
}

} // namespace petseg
