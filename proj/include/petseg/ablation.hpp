#ifndef PETSEG_ABLATION_HPP
#define PETSEG_ABLATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "petseg/metrics.hpp"
#include "petseg/net/train.hpp"

namespace petseg {

// Paired single-label vs multilabel experiment on the synthetic
// organ-distractor task: both arms train on identical data, seeds and
// hyperparameters; the only difference is whether organ classes are
// supervised. Lesion-class metrics on a held-out set are reported in the
// model x dataset-size layout.
struct AblationConfig {
    Index3 case_size{32, 32, 32};
    int n_organs = 3;
    int max_lesions = 3; // per case, drawn uniformly in [1, max_lesions]
    std::vector<int> train_sizes{16};
    int test_cases = 8;
    int n_seeds = 3;
    std::uint64_t base_seed = 90210;

    int epochs = 90;
    int batch_size = 8;
    double learning_rate = 0.01;
    double momentum = 0.99;
    double dice_ce_mix = 0.5;
    int base_features = 8;
    int num_downsamples = 2;
    bool augment = false;
    std::string precision = "f32"; // or "f64"

    MetricParams metric_params{};
    double ci_level = 0.95;
    int n_boot = 10000;

    void validate() const;
};

struct AblationRun {
    std::string arm; // "singlelabel" or "multilabel"
    int train_size = 0;
    int seed_index = 0;
    MetricsReport report;
    std::vector<double> epoch_loss;
};

struct AblationComparison {
    int train_size = 0;
    int seed_index = 0;
    double single_dice = 0.0, multi_dice = 0.0;
    double single_fpv = 0.0, multi_fpv = 0.0;
    bool multilabel_fpv_lower = false;
    bool multilabel_dice_ge = false;
};

struct AblationReport {
    std::vector<AblationRun> runs;
    std::vector<AblationComparison> comparisons;

    // seeds at this size where the multilabel arm had strictly lower FPV and
    // at least the single-label dice
    int seeds_with_direction(int train_size) const;

    std::string to_json() const;
    // Table shaped like the paper's summary: metric rows, arm x size columns,
    // "mean (ci_lo, ci_hi)" cells pooled over seeds.
    std::string table_csv() const;
};

AblationReport run_label_ablation(const AblationConfig& config);

} // namespace petseg

#endif
