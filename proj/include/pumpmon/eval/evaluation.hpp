#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pumpmon/data/dataset.hpp"
#include "pumpmon/detectors/detectors.hpp"
#include "pumpmon/eval/metrics.hpp"
#include "pumpmon/nn/adam.hpp"
#include "pumpmon/nn/model.hpp"

namespace pumpmon::eval {

// Pumps that can act as a held-out fold: at least 2 normal samples (so the
// adaptation split works) and at least 1 abnormal sample (so the fold has
// something to detect).
std::vector<std::string> evaluable_pumps(const data::PumpDataset& ds);

enum class Algorithm { threshold, cnn, ecnn, combined };

std::string to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& s);

struct CvTask {
    Algorithm algorithm = Algorithm::combined;
    detect::SelectionPolicy::Kind policy = detect::SelectionPolicy::Kind::fpr;
};

struct CvConfig {
    nn::ModelConfig model;   // depth/kernel/channels; `enhanced` is derived per task
    nn::TrainHyper hyper;    // hyper.seed is ignored; seeds derive from `seed`
    std::uint64_t seed = 0;
    double adapt_fraction = 0.5;
    double target_fpr = 0.10;
    std::vector<double> factor_grid = detect::default_factor_grid();
    int fixed_calib_max_per_pump = 30; // cap on samples per pump when calibrating fixed params
    int max_folds = 0;                 // 0 = all evaluable pumps
    int jobs = 1;
    std::function<void(const std::string&)> progress; // one line per finished fold
};

// Per-pump record of how adaptation went, for auditing FPR selection.
struct SelectionAudit {
    std::string pump_id;
    std::string chosen;          // threshold | cnn | ecnn
    double parameter = 0.0;      // T or F (0 for cnn)
    bool fpr_selected = false;   // true when the FPR sweep produced the parameter
    double adapt_fpr = 0.0;      // FPR of the final detector on the adaptation normals
};

struct CvRun {
    CvTask task;
    std::vector<EvalRecord> records; // per-pump rows then one aggregate row
    std::vector<SelectionAudit> audits;
    double aggregate_accuracy = 0.0; // unweighted mean of per-pump accuracies
    double weighted_accuracy = 0.0;  // sample-weighted, reported but secondary
    std::optional<double> aggregate_fpr;
    std::optional<double> aggregate_tpdr;
};

struct CvOutput {
    std::vector<CvRun> runs;
    std::vector<std::string> warnings;
    int folds_run = 0;
    int folds_skipped = 0;
};

// Leave-one-pump-out cross-validation. All tasks share the models trained
// per fold, so mixing policies does not multiply training cost.
CvOutput cross_validate_many(const data::PumpDataset& ds, const std::vector<CvTask>& tasks,
                             const CvConfig& config);
CvOutput cross_validate(const data::PumpDataset& ds, const CvTask& task, const CvConfig& config);

struct DseGrid {
    std::vector<int> depths{2, 4, 6, 8, 10};
    std::vector<int> kernels{3, 7, 11, 15, 19, 23};
    std::vector<int> channel_counts{5, 10, 20, 30};
    bool enhanced = false;

    void validate() const;
};

struct DseConfig {
    nn::TrainHyper hyper; // hyper.seed ignored; derived from `seed`
    std::uint64_t seed = 0;
    double test_ratio = 0.2;
    int jobs = 1;
    std::function<void(const std::string&)> progress; // one line per finished config
};

struct DseOutput {
    std::vector<EvalRecord> records; // one per trained configuration, grid order
    std::vector<EvalRecord> pareto;  // MAC/accuracy front of `records`
    std::vector<std::string> warnings;
};

// Sweep the architecture grid on a fixed stratified train/test split,
// depth-major order. Infeasible configurations are skipped with a warning.
DseOutput run_dse(const data::PumpDataset& ds, const DseGrid& grid, const DseConfig& config);

// Records not dominated in (mac_count, accuracy): keep r unless some q has
// mac <= and accuracy >= with at least one strict. Exact duplicates keep the
// first occurrence. Result sorted by ascending mac_count.
std::vector<EvalRecord> pareto_front(const std::vector<EvalRecord>& records);

} // namespace pumpmon::eval
