#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <unordered_map>

#include "pumpmon/eval/evaluation.hpp"
#include "pumpmon/nn/train.hpp"
#include "pumpmon/prng.hpp"
#include "parallel_for.hpp"

namespace pumpmon::eval {

void DseGrid::validate() const {
    if (depths.empty() || kernels.empty() || channel_counts.empty())
        throw UsageError("architecture grid: empty axis");
    for (int k : kernels)
        if (k < 1 || k % 2 == 0)
            throw UsageError("architecture grid: kernel sizes must be odd and positive");
}

namespace {

constexpr double kFactorLo = detect::kTrainFactorLo;
constexpr double kFactorHi = detect::kTrainFactorHi;

struct ConfigResult {
    EvalRecord record;
};

} // namespace

DseOutput run_dse(const data::PumpDataset& ds, const DseGrid& grid, const DseConfig& config) {
    grid.validate();
    config.hyper.validate();
    if (!(config.test_ratio > 0.0) || !(config.test_ratio < 1.0))
        throw UsageError("test ratio must be in (0, 1)");
    if (ds.pumps.empty()) throw UsageError("architecture sweep: empty dataset");

    DseOutput out;

    const data::FixedSplit split =
        data::split_fixed(ds, config.test_ratio, derive_seed(config.seed, 101));
    for (const auto& w : split.warnings) out.warnings.push_back(w);
    if (split.train.size() < 2)
        throw UsageError("architecture sweep: training split has fewer than 2 samples");
    if (split.test.empty())
        throw UsageError("architecture sweep: test split is empty");

    // Per-pump normal means over the *training* samples only; the test side
    // must not leak into the deviation channels.
    std::unordered_map<std::string, data::NormalMean> mean_of;
    if (grid.enhanced) {
        std::unordered_map<std::string, std::vector<data::SampleRef>> train_normals;
        for (const auto* s : split.train.samples)
            if (s->label == 0) train_normals[s->pump_id].push_back(s);
        for (const auto& pump : ds.pumps) {
            auto it = train_normals.find(pump.id);
            if (it == train_normals.end()) {
                out.warnings.push_back("pump '" + pump.id
                                       + "' has no normal samples in the training split; its "
                                         "samples are excluded from the sweep");
                continue;
            }
            mean_of.emplace(pump.id, data::compute_normal_mean(it->second));
        }
    }

    auto usable = [&](const data::VibrationSample* s) {
        return !grid.enhanced || mean_of.count(s->pump_id) > 0;
    };
    std::vector<data::SampleRef> train_samples, test_samples;
    for (const auto* s : split.train.samples)
        if (usable(s)) train_samples.push_back(s);
    for (const auto* s : split.test.samples)
        if (usable(s)) test_samples.push_back(s);
    if (train_samples.size() < 2 || test_samples.empty())
        throw UsageError("architecture sweep: not enough usable samples after exclusions");

    std::vector<double> targets;
    targets.reserve(train_samples.size());
    for (const auto* s : train_samples) targets.push_back(static_cast<double>(s->label));
    std::vector<int> test_labels;
    test_labels.reserve(test_samples.size());
    for (const auto* s : test_samples) test_labels.push_back(s->label);

    // Raw inputs do not depend on the configuration; build them once.
    std::vector<nn::Tensor<float>> raw_inputs;
    if (!grid.enhanced) {
        raw_inputs.reserve(train_samples.size());
        for (const auto* s : train_samples)
            raw_inputs.push_back(detect::build_raw_input<float>(*s));
    }

    // Which test pumps count for the detection rate is a property of the
    // split, not of the configuration; warn once.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> pump_test_indices;
    {
        std::unordered_map<std::string, std::size_t> slot;
        for (std::size_t i = 0; i < test_samples.size(); ++i) {
            const std::string& id = test_samples[i]->pump_id;
            auto it = slot.find(id);
            if (it == slot.end()) {
                slot.emplace(id, pump_test_indices.size());
                pump_test_indices.push_back({id, {i}});
            } else {
                pump_test_indices[it->second].second.push_back(i);
            }
        }
    }
    std::vector<std::pair<std::string, std::vector<std::size_t>>> counted_pumps;
    for (const auto& [id, idx] : pump_test_indices) {
        const bool has_abnormal = std::any_of(idx.begin(), idx.end(), [&](std::size_t i) {
            return test_labels[i] == 1;
        });
        if (has_abnormal) {
            counted_pumps.push_back({id, idx});
        } else {
            out.warnings.push_back("pump '" + id
                                   + "' has no abnormal samples in the test split; excluded "
                                     "from the detection rate");
        }
    }
    const bool test_has_negatives =
        std::find(test_labels.begin(), test_labels.end(), 0) != test_labels.end();
    if (!test_has_negatives)
        out.warnings.push_back("test split has no normal samples; FPR left empty");

    // Depth-major grid walk; infeasible entries are skipped up front so the
    // run list and its derived seeds stay stable.
    struct Planned {
        std::size_t grid_index;
        nn::ModelConfig cfg;
    };
    std::vector<Planned> plan;
    std::size_t gi = 0;
    for (int d : grid.depths) {
        for (int k : grid.kernels) {
            for (int c : grid.channel_counts) {
                nn::ModelConfig cfg;
                cfg.depth = d;
                cfg.kernel = k;
                cfg.channels = c;
                cfg.enhanced = grid.enhanced;
                cfg.input_length = data::kSampleLength;
                try {
                    cfg.validate();
                    plan.push_back({gi, cfg});
                } catch (const UsageError& e) {
                    out.warnings.push_back("configuration depth=" + std::to_string(d)
                                           + " kernel=" + std::to_string(k) + " channels="
                                           + std::to_string(c) + " skipped: " + e.what());
                }
                ++gi;
            }
        }
    }
    if (plan.empty()) throw UsageError("architecture sweep: no feasible configuration");

    std::vector<ConfigResult> results(plan.size());
    std::mutex progress_mutex;

    auto run_config = [&](std::size_t pi) {
        const nn::ModelConfig& cfg = plan[pi].cfg;
        try {
            nn::TrainHyper hyper = config.hyper;
            hyper.seed = derive_seed(config.seed, 1000 + plan[pi].grid_index);

            nn::Model<float> model;
            if (grid.enhanced) {
                Prng frng(derive_seed(config.seed, 2000 + plan[pi].grid_index));
                std::vector<nn::Tensor<float>> inputs;
                inputs.reserve(train_samples.size());
                for (const auto* s : train_samples) {
                    const double f =
                        std::exp(frng.uniform(std::log(kFactorLo), std::log(kFactorHi)));
                    inputs.push_back(
                        detect::build_ecnn_input<float>(*s, mean_of.at(s->pump_id), f));
                }
                model = nn::train(inputs, targets, cfg, hyper);
            } else {
                model = nn::train(raw_inputs, targets, cfg, hyper);
            }

            // Test-time deviation channels use a neutral factor of 1; the
            // sweep compares architectures, not adaptation policies.
            std::vector<int> preds;
            preds.reserve(test_samples.size());
            for (const auto* s : test_samples) {
                if (grid.enhanced)
                    preds.push_back(
                        detect::ecnn_predict(model, *s, mean_of.at(s->pump_id), 1.0).label);
                else
                    preds.push_back(detect::cnn_predict(model, *s).label);
            }

            EvalRecord rec;
            rec.scope = "aggregate";
            rec.algorithm = grid.enhanced ? "ecnn" : "cnn";
            rec.policy = "none";
            rec.depth = cfg.depth;
            rec.kernel = cfg.kernel;
            rec.channels = cfg.channels;
            rec.mac_count = nn::count_macs(cfg);
            rec.accuracy = accuracy(preds, test_labels);
            rec.sample_count = test_labels.size();
            if (test_has_negatives) rec.fpr = false_positive_rate(preds, test_labels);
            if (!counted_pumps.empty()) {
                std::size_t detected = 0;
                for (const auto& [id, idx] : counted_pumps) {
                    const bool hit = std::any_of(idx.begin(), idx.end(), [&](std::size_t i) {
                        return test_labels[i] == 1 && preds[i] == 1;
                    });
                    if (hit) ++detected;
                }
                rec.tpdr =
                    static_cast<double>(detected) / static_cast<double>(counted_pumps.size());
            }
            results[pi].record = std::move(rec);
        } catch (const std::exception& e) {
            throw std::runtime_error("configuration depth=" + std::to_string(cfg.depth)
                                     + " kernel=" + std::to_string(cfg.kernel) + " channels="
                                     + std::to_string(cfg.channels) + ": " + e.what());
        }
        if (config.progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            config.progress("configuration " + std::to_string(pi + 1) + "/"
                            + std::to_string(plan.size()) + " (depth=" + std::to_string(cfg.depth)
                            + " kernel=" + std::to_string(cfg.kernel)
                            + " channels=" + std::to_string(cfg.channels) + ") done");
        }
    };

    internal::parallel_for(plan.size(), config.jobs, run_config);

    out.records.reserve(results.size());
    for (auto& r : results) out.records.push_back(std::move(r.record));
    out.pareto = pareto_front(out.records);
    return out;
}

std::vector<EvalRecord> pareto_front(const std::vector<EvalRecord>& records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (records[a].mac_count != records[b].mac_count)
            return records[a].mac_count < records[b].mac_count;
        if (records[a].accuracy != records[b].accuracy)
            return records[a].accuracy > records[b].accuracy;
        return a < b;
    });
    std::vector<EvalRecord> front;
    double best_acc = -1.0;
    for (std::size_t i : order) {
        const EvalRecord& r = records[i];
        if (r.accuracy > best_acc) {
            front.push_back(r);
            best_acc = r.accuracy;
        }
    }
    return front;
}

} // namespace pumpmon::eval
