#ifndef PETSEG_METRICS_HPP
#define PETSEG_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "petseg/label_fusion.hpp"
#include "petseg/volume.hpp"

namespace petseg {

enum class Connectivity : int { six = 6, eighteen = 18, twenty_six = 26 };

Connectivity connectivity_from_int(int n);

struct ComponentMap {
    std::vector<std::int32_t> labels; // 0 = background, components 1..count
    std::int32_t count = 0;
};

// Deterministic labeling: components numbered by ascending first voxel in
// flat scan order.
ComponentMap connected_components(const LabelMap& mask, Connectivity conn);

// 2|P∩G| / (|P| + |G|); 1.0 when both masks are empty.
double dice(const LabelMap& pred, const LabelMap& gt);

// mL of predicted components that do not touch the ground truth at all.
double false_positive_volume(const LabelMap& pred, const LabelMap& gt, Connectivity conn);

// mL of ground-truth components untouched by the prediction.
double false_negative_volume(const LabelMap& pred, const LabelMap& gt, Connectivity conn);

enum class SurfaceDistanceMethod { distance_transform, brute_force };

// Normalized surface dice at a world-mm tolerance. Boundary voxels are
// foreground voxels with at least one background 6-neighbor (the volume
// border counts as background). 1.0 when both masks are empty, 0.0 when
// exactly one is. Both methods return identical results; the distance
// transform is the default, the brute-force path exists as a cross-check.
double surface_dice(const LabelMap& pred, const LabelMap& gt, double tolerance_mm,
                    SurfaceDistanceMethod method = SurfaceDistanceMethod::distance_transform);

struct MetricParams {
    Connectivity connectivity = Connectivity::twenty_six;
    double nsd_tolerance_mm = 2.0;
    bool compute_nsd = true;
};

struct CaseMetrics {
    std::string study_id;
    double dice = 0.0;
    double fpv_ml = 0.0;
    double fnv_ml = 0.0;
    std::optional<double> nsd;
};

// Scores the lesion class of a (possibly multilabel) prediction against the
// ground truth. Inputs are reduced with reduce_to_lesion first.
CaseMetrics evaluate_case(const LabelMap& pred, const LabelMap& gt, const LabelSchema& schema,
                          const MetricParams& params);

struct AggregateStats {
    double mean = 0.0;
    double std_dev = 0.0; // population
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct MetricsReport {
    std::vector<CaseMetrics> rows; // sorted by study_id
    AggregateStats dice;
    AggregateStats fpv_ml;
    AggregateStats fnv_ml;
    std::optional<AggregateStats> nsd;
    std::string ci_method = "percentile_bootstrap";
    double ci_level = 0.95;
    int n_boot = 10000;
    std::uint64_t seed = 0;

    std::string to_json() const;
    std::string to_csv() const;
};

// Percentile bootstrap on the mean, seeded and deterministic. Rows are
// sorted by study_id before aggregation so input order never matters.
MetricsReport summarize(std::vector<CaseMetrics> rows, double ci_level = 0.95,
                        int n_boot = 10000, std::uint64_t seed = 0);

} // namespace petseg

#endif
