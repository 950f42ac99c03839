#include "petseg/ablation.hpp"

#include <algorithm>

#include <json.hpp>

#include "petseg/net/synth.hpp"
#include "petseg/pipeline.hpp"
#include "petseg/rng.hpp"

namespace petseg {

using nlohmann::json;

void AblationConfig::validate() const {
    if (train_sizes.empty() || test_cases < 1 || n_seeds < 1)
        throw ConfigError("ablation needs train sizes, test cases and seeds");
    for (int s : train_sizes)
        if (s < 1)
            throw ConfigError("train sizes must be positive");
    if (n_organs < 1)
        throw ConfigError("the distractor task needs at least one organ");
    if (max_lesions < 1)
        throw ConfigError("max_lesions must be >= 1");
    if (precision != "f32" && precision != "f64")
        throw ConfigError("precision must be f32 or f64");
    const std::int64_t divisor = std::int64_t(1) << num_downsamples;
    for (auto d : case_size)
        if (d % divisor != 0)
            throw ConfigError("case size must be divisible by 2^num_downsamples");
}

namespace {

struct CasePool {
    std::vector<net::SyntheticStudy> train;
    std::vector<net::SyntheticStudy> test;
};

CasePool generate_pool(const AblationConfig& cfg, int seed_index) {
    Rng rng(cfg.base_seed);
    Rng seed_rng = rng.fork(std::uint64_t(seed_index));

    const int max_train = *std::max_element(cfg.train_sizes.begin(), cfg.train_sizes.end());
    CasePool pool;
    for (int idx = 0; idx < max_train + cfg.test_cases; ++idx) {
        const int n_lesions = 1 + int(seed_rng.next_below(std::uint64_t(cfg.max_lesions)));
        const auto case_seed = seed_rng.next_u64();
        auto study = net::generate_synthetic_study(cfg.case_size, cfg.n_organs, n_lesions, case_seed);
        if (idx < max_train)
            pool.train.push_back(std::move(study));
        else
            pool.test.push_back(std::move(study));
    }
    return pool;
}

LabelMap arm_labels(const net::SyntheticStudy& study, const LabelSchema& schema) {
    if (schema.num_foreground() == 1)
        return study.lesion;
    return fuse_labels(study.lesion, study.organs, schema);
}

template <typename T>
MetricsReport run_arm_t(const AblationConfig& cfg, const LabelSchema& schema,
                        const CasePool& pool, int train_size, int seed_index,
                        std::vector<double>* epoch_loss_out) {
    net::NetConfig net_cfg;
    net_cfg.in_channels = 2;
    net_cfg.num_classes = schema.num_classes();
    net_cfg.base_features = cfg.base_features;
    net_cfg.num_downsamples = cfg.num_downsamples;
    net_cfg.feature_cap = 1024;

    std::vector<net::TrainingCase<T>> dataset;
    dataset.reserve(std::size_t(train_size));
    for (int idx = 0; idx < train_size; ++idx) {
        const auto& study = pool.train[std::size_t(idx)];
        dataset.push_back(make_training_case<T>(study.pet, study.ct, arm_labels(study, schema)));
    }

    const std::uint64_t net_seed = cfg.base_seed * 1000003ULL + std::uint64_t(seed_index);
    auto net = net::build_network<T>(net_cfg, net_seed);

    net::OptimizerState opt;
    opt.learning_rate = cfg.learning_rate;
    opt.momentum = cfg.momentum;
    opt.max_epochs = cfg.epochs;

    net::LossSpec loss;
    loss.dice_ce_mix = cfg.dice_ce_mix;

    AugmentationSpec aug = AugmentationSpec::disabled();
    if (cfg.augment) {
        aug.mirror_axes = {0, 1, 2};
        aug.p_mirror = 0.5;
    }

    const auto history =
        net::train(net, dataset, cfg.epochs, cfg.batch_size, opt, loss, aug, net_seed + 17);
    if (epoch_loss_out) *epoch_loss_out = history.epoch_loss;

    std::vector<CaseMetrics> rows;
    for (std::size_t idx = 0; idx < pool.test.size(); ++idx) {
        const auto& study = pool.test[idx];
        const auto test_case = make_training_case<T>(study.pet, study.ct, study.lesion);
        LabelMap pred = predict_labels(net, test_case.image, study.lesion.geometry);
        CaseMetrics m = evaluate_case(pred, study.lesion, schema, cfg.metric_params);
        m.study_id = "seed" + std::to_string(seed_index) + "_case" + std::to_string(idx);
        rows.push_back(std::move(m));
    }
    return summarize(std::move(rows), cfg.ci_level, cfg.n_boot, cfg.base_seed + std::uint64_t(seed_index));
}

MetricsReport run_arm(const AblationConfig& cfg, const LabelSchema& schema, const CasePool& pool,
                      int train_size, int seed_index, std::vector<double>* epoch_loss_out) {
    if (cfg.precision == "f64")
        return run_arm_t<double>(cfg, schema, pool, train_size, seed_index, epoch_loss_out);
    return run_arm_t<float>(cfg, schema, pool, train_size, seed_index, epoch_loss_out);
}

json stats_json(const AggregateStats& s) {
    return {{"mean", s.mean}, {"std", s.std_dev}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}};
}

} // namespace

AblationReport run_label_ablation(const AblationConfig& config) {
    config.validate();

    const LabelSchema single = LabelSchema::lesion_only();
    const LabelSchema multi = LabelSchema::synthetic(config.n_organs);

    AblationReport report;
    for (int seed_index = 0; seed_index < config.n_seeds; ++seed_index) {
        const CasePool pool = generate_pool(config, seed_index);
        for (int train_size : config.train_sizes) {
            AblationRun srun;
            srun.arm = "singlelabel";
            srun.train_size = train_size;
            srun.seed_index = seed_index;
            srun.report = run_arm(config, single, pool, train_size, seed_index, &srun.epoch_loss);

            AblationRun mrun;
            mrun.arm = "multilabel";
            mrun.train_size = train_size;
            mrun.seed_index = seed_index;
            mrun.report = run_arm(config, multi, pool, train_size, seed_index, &mrun.epoch_loss);

            AblationComparison cmp;
            cmp.train_size = train_size;
            cmp.seed_index = seed_index;
            cmp.single_dice = srun.report.dice.mean;
            cmp.multi_dice = mrun.report.dice.mean;
            cmp.single_fpv = srun.report.fpv_ml.mean;
            cmp.multi_fpv = mrun.report.fpv_ml.mean;
            cmp.multilabel_fpv_lower = cmp.multi_fpv < cmp.single_fpv;
            cmp.multilabel_dice_ge = cmp.multi_dice >= cmp.single_dice;

            report.runs.push_back(std::move(srun));
            report.runs.push_back(std::move(mrun));
            report.comparisons.push_back(cmp);
        }
    }
    return report;
}

int AblationReport::seeds_with_direction(int train_size) const {
    int count = 0;
    for (const auto& c : comparisons)
        if (c.train_size == train_size && c.multilabel_fpv_lower && c.multilabel_dice_ge) ++count;
    return count;
}

std::string AblationReport::to_json() const {
    json j;
    json jruns = json::array();
    for (const auto& r : runs) {
        json run{{"arm", r.arm},
                 {"train_size", r.train_size},
                 {"seed_index", r.seed_index},
                 {"aggregates",
                  {{"dice", stats_json(r.report.dice)},
                   {"fpv_ml", stats_json(r.report.fpv_ml)},
                   {"fnv_ml", stats_json(r.report.fnv_ml)}}},
                 {"final_epoch_loss", r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()}};
        if (r.report.nsd) run["aggregates"]["nsd"] = stats_json(*r.report.nsd);
        json rows = json::array();
        for (const auto& row : r.report.rows) {
            json jr{{"study_id", row.study_id},
                    {"dice", row.dice},
                    {"fpv_ml", row.fpv_ml},
                    {"fnv_ml", row.fnv_ml}};
            if (row.nsd) jr["nsd"] = *row.nsd;
            rows.push_back(jr);
        }
        run["rows"] = rows;
        jruns.push_back(run);
    }
    j["runs"] = jruns;
    json jcmp = json::array();
    for (const auto& c : comparisons)
        jcmp.push_back({{"train_size", c.train_size},
                        {"seed_index", c.seed_index},
                        {"single_dice", c.single_dice},
                        {"multi_dice", c.multi_dice},
                        {"single_fpv", c.single_fpv},
                        {"multi_fpv", c.multi_fpv},
                        {"multilabel_fpv_lower", c.multilabel_fpv_lower},
                        {"multilabel_dice_ge", c.multilabel_dice_ge}});
    j["comparisons"] = jcmp;
    return j.dump(2) + "\n";
}

namespace {

std::string cell(double mean, double lo, double hi) {
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        return std::string(buf);
    };
    return fmt(mean) + " (" + fmt(lo) + ", " + fmt(hi) + ")";
}

} // namespace

std::string AblationReport::table_csv() const {
    // pool the per-case rows of every seed per (arm, size), then aggregate
    std::vector<int> sizes;
    for (const auto& r : runs)
        if (std::find(sizes.begin(), sizes.end(), r.train_size) == sizes.end())
            sizes.push_back(r.train_size);
    std::sort(sizes.begin(), sizes.end());

    const char* arms[2] = {"singlelabel", "multilabel"};
    std::string header = "metric";
    std::vector<MetricsReport> pooled;
    for (const char* arm : arms)
        for (int size : sizes) {
            header += ",";
            header += arm;
            header += "_N" + std::to_string(size);
            std::vector<CaseMetrics> rows;
            for (const auto& r : runs)
                if (r.arm == arm && r.train_size == size)
                    rows.insert(rows.end(), r.report.rows.begin(), r.report.rows.end());
            pooled.push_back(summarize(std::move(rows), runs.front().report.ci_level,
                                       runs.front().report.n_boot, runs.front().report.seed));
        }

    std::string out = header + "\n";
    const char* metric_names[3] = {"dice", "fpv_ml", "fnv_ml"};
    for (int metric = 0; metric < 3; ++metric) {
        out += metric_names[metric];
        for (const auto& rep : pooled) {
            const AggregateStats& s =
                metric == 0 ? rep.dice : metric == 1 ? rep.fpv_ml : rep.fnv_ml;
            out += ",\"" + cell(s.mean, s.ci_lo, s.ci_hi) + "\"";
        }
        out += "\n";
    }
    return out;
}

} // namespace petseg
