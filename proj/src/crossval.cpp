#include <algorithm>
#include <cfloat>
#include <cmath>
#include <mutex>
#include <unordered_map>

#include "pumpmon/eval/evaluation.hpp"
#include "pumpmon/nn/train.hpp"
#include "pumpmon/prng.hpp"
#include "parallel_for.hpp"

namespace pumpmon::eval {

std::vector<std::string> evaluable_pumps(const data::PumpDataset& ds) {
    std::vector<std::string> out;
    for (const auto& pump : ds.pumps) {
        std::size_t normals = 0;
        for (const auto& s : pump.samples)
            if (s.label == 0) ++normals;
        if (normals >= 2) out.push_back(pump.id);
    }
    return out;
}

std::string to_string(Algorithm algo) {
    switch (algo) {
        case Algorithm::threshold: return "threshold";
        case Algorithm::cnn: return "cnn";
        case Algorithm::ecnn: return "ecnn";
        case Algorithm::combined: return "combined";
    }
    return "combined";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "threshold") return Algorithm::threshold;
    if (s == "cnn") return Algorithm::cnn;
    if (s == "ecnn") return Algorithm::ecnn;
    if (s == "combined") return Algorithm::combined;
    throw UsageError("unknown algorithm '" + s + "'");
}

namespace {

using detect::SelectionPolicy;

constexpr double kFactorLo = detect::kTrainFactorLo;
constexpr double kFactorHi = detect::kTrainFactorHi;

struct TaskFoldResult {
    bool valid = false;
    PumpOutcome outcome;
    SelectionAudit audit;
    std::vector<std::string> warnings;
};

struct FoldResult {
    std::vector<TaskFoldResult> tasks;
    std::vector<std::string> warnings; // fold-level (training side)
};

struct TrainPumpInfo {
    const data::PumpSamples* pump = nullptr;
    data::NormalMean mean;
};

double fraction_positive(const std::vector<int>& labels) {
    std::size_t pos = 0;
    for (int v : labels) pos += (v == 1) ? 1u : 0u;
    return labels.empty() ? 0.0 : static_cast<double>(pos) / static_cast<double>(labels.size());
}

// Grid value maximizing the unweighted mean of per-pump accuracies; ties
// toward the larger value. `correct_of(pump_index, value)` -> (correct, n).
template <typename F>
double calibrate_fixed(const std::vector<double>& grid, std::size_t n_pumps, F&& accuracy_of) {
    double best_value = 0.0, best_score = -1.0;
    for (double v : grid) {
        double sum = 0.0;
        for (std::size_t p = 0; p < n_pumps; ++p) sum += accuracy_of(p, v);
        const double score = sum / static_cast<double>(n_pumps);
        if (score > best_score || (score == best_score && v > best_value)) {
            best_score = score;
            best_value = v;
        }
    }
    return best_value;
}

} // namespace

CvOutput cross_validate_many(const data::PumpDataset& ds, const std::vector<CvTask>& tasks,
                             const CvConfig& config_in) {
    if (tasks.empty()) throw UsageError("cross-validation: no tasks");
    if (ds.pumps.size() < 2)
        throw UsageError("cross-validation needs at least 2 pumps");
    if (!(config_in.adapt_fraction > 0.0) || !(config_in.adapt_fraction < 1.0))
        throw UsageError("adapt fraction must be in (0, 1)");
    if (config_in.max_folds < 0) throw UsageError("max_folds must be non-negative");
    if (config_in.fixed_calib_max_per_pump < 1)
        throw UsageError("fixed calibration cap must be at least 1");
    for (const auto& task : tasks)
        if (task.algorithm == Algorithm::combined && task.policy != SelectionPolicy::Kind::fpr)
            throw UsageError("combined detector adapts via FPR selection; policy must be 'fpr'");

    CvConfig config = config_in;
    config.model.input_length = data::kSampleLength;
    config.model.validate();
    config.hyper.validate();

    SelectionPolicy fpr_policy;
    fpr_policy.kind = SelectionPolicy::Kind::fpr;
    fpr_policy.target_fpr = config.target_fpr;
    fpr_policy.grid = config.factor_grid;
    fpr_policy.validate();

    bool needs_cnn = false, needs_ecnn = false, needs_fixed_thr = false, needs_fixed_ecnn = false;
    for (const auto& task : tasks) {
        if (task.algorithm == Algorithm::cnn) needs_cnn = true;
        if (task.algorithm == Algorithm::ecnn || task.algorithm == Algorithm::combined)
            needs_ecnn = true;
        if (task.algorithm == Algorithm::threshold && task.policy == SelectionPolicy::Kind::fixed)
            needs_fixed_thr = true;
        if (task.algorithm == Algorithm::ecnn && task.policy == SelectionPolicy::Kind::fixed)
            needs_fixed_ecnn = true;
    }

    CvOutput out;

    // Fold plan: pumps in stored order; a pump whose adaptation set cannot
    // be formed (fewer than 2 normals) is skipped with a warning. max_folds
    // caps the number of folds actually run.
    struct PlanEntry {
        std::size_t pump_index;
        std::string pump_id;
    };
    std::vector<PlanEntry> plan;
    for (std::size_t pi = 0; pi < ds.pumps.size(); ++pi) {
        if (config.max_folds > 0
            && plan.size() == static_cast<std::size_t>(config.max_folds)) break;
        std::size_t normals = 0;
        for (const auto& s : ds.pumps[pi].samples)
            if (s.label == 0) ++normals;
        if (normals < 2) {
            out.warnings.push_back("pump '" + ds.pumps[pi].id
                                   + "' has fewer than 2 normal samples; fold skipped");
            ++out.folds_skipped;
            continue;
        }
        plan.push_back({pi, ds.pumps[pi].id});
    }
    if (plan.empty())
        throw UsageError("cross-validation: no pump has enough normal samples to form a fold");

    std::vector<FoldResult> folds(plan.size());
    std::mutex progress_mutex;

    auto run_fold = [&](std::size_t fi) {
        const std::string& held_id = plan[fi].pump_id;
        try {
            FoldResult fold;
            fold.tasks.resize(tasks.size());

            const std::uint64_t fold_seed = derive_seed(config.seed, fi + 1);
            const data::LopoSplit lopo = data::split_leave_one_pump_out(ds, held_id);
            const data::AdaptSplit adapt =
                data::split_adaptation(lopo.test, config.adapt_fraction);
            const data::NormalMean mean_adapt = data::compute_normal_mean(adapt.adapt_normals);

            std::vector<int> labels_eval;
            labels_eval.reserve(adapt.eval_set.size());
            for (const auto* s : adapt.eval_set.samples) labels_eval.push_back(s->label);
            const bool eval_has_abnormal =
                std::find(labels_eval.begin(), labels_eval.end(), 1) != labels_eval.end();

            // Training pumps that can supply a normal mean (everything the
            // deviation channels and the fixed calibrations need).
            std::vector<TrainPumpInfo> train_pumps;
            std::unordered_map<std::string, const data::NormalMean*> mean_of;
            for (const auto& pump : ds.pumps) {
                if (pump.id == held_id) continue;
                std::vector<data::SampleRef> refs;
                for (const auto& s : pump.samples)
                    if (s.label == 0) refs.push_back(&s);
                if (refs.empty()) {
                    fold.warnings.push_back("pump '" + pump.id
                                            + "' has no normal samples; excluded from "
                                              "deviation-channel training and calibration");
                    continue;
                }
                train_pumps.push_back({&pump, data::compute_normal_mean(refs)});
            }
            for (auto& tp : train_pumps) mean_of[tp.pump->id] = &tp.mean;

            nn::Model<float> cnn_model, ecnn_model;
            nn::TrainHyper hyper = config.hyper;

            if (needs_cnn) {
                std::vector<nn::Tensor<float>> inputs;
                std::vector<double> targets;
                inputs.reserve(lopo.train.size());
                targets.reserve(lopo.train.size());
                for (const auto* s : lopo.train.samples) {
                    inputs.push_back(detect::build_raw_input<float>(*s));
                    targets.push_back(static_cast<double>(s->label));
                }
                nn::ModelConfig cfg = config.model;
                cfg.enhanced = false;
                hyper.seed = derive_seed(fold_seed, 1);
                cnn_model = nn::train(inputs, targets, cfg, hyper);
            }

            if (needs_ecnn) {
                Prng frng(derive_seed(fold_seed, 3));
                std::vector<nn::Tensor<float>> inputs;
                std::vector<double> targets;
                inputs.reserve(lopo.train.size());
                targets.reserve(lopo.train.size());
                for (const auto* s : lopo.train.samples) {
                    auto it = mean_of.find(s->pump_id);
                    if (it == mean_of.end()) continue;
                    const double f =
                        std::exp(frng.uniform(std::log(kFactorLo), std::log(kFactorHi)));
                    inputs.push_back(detect::build_ecnn_input<float>(*s, *it->second, f));
                    targets.push_back(static_cast<double>(s->label));
                }
                nn::ModelConfig cfg = config.model;
                cfg.enhanced = true;
                hyper.seed = derive_seed(fold_seed, 2);
                ecnn_model = nn::train(inputs, targets, cfg, hyper);
            }

            // Global (per-fold) parameters for the fixed policy, calibrated
            // on the training pumps against their own normal means.
            double fixed_t = 0.0, fixed_f = 0.0;
            if (needs_fixed_thr) {
                std::vector<std::vector<double>> eps(train_pumps.size());
                std::vector<std::vector<int>> lab(train_pumps.size());
                for (std::size_t p = 0; p < train_pumps.size(); ++p) {
                    for (const auto& s : train_pumps[p].pump->samples) {
                        eps[p].push_back(detect::threshold_epsilon(s, train_pumps[p].mean));
                        lab[p].push_back(s.label);
                    }
                }
                fixed_t = calibrate_fixed(
                    config.factor_grid, train_pumps.size(), [&](std::size_t p, double t) {
                        std::size_t correct = 0;
                        for (std::size_t i = 0; i < eps[p].size(); ++i)
                            if (detect::threshold_predict(eps[p][i], t) == lab[p][i]) ++correct;
                        return static_cast<double>(correct)
                               / static_cast<double>(eps[p].size());
                    });
            }
            if (needs_fixed_ecnn) {
                const std::size_t cap =
                    static_cast<std::size_t>(config.fixed_calib_max_per_pump);
                std::vector<std::vector<data::SampleRef>> subset(train_pumps.size());
                for (std::size_t p = 0; p < train_pumps.size(); ++p) {
                    const auto& samples = train_pumps[p].pump->samples;
                    for (std::size_t i = 0; i < samples.size() && i < cap; ++i)
                        subset[p].push_back(&samples[i]);
                }
                fixed_f = calibrate_fixed(
                    config.factor_grid, train_pumps.size(), [&](std::size_t p, double f) {
                        std::size_t correct = 0;
                        for (const auto* s : subset[p])
                            if (detect::ecnn_predict(ecnn_model, *s, train_pumps[p].mean, f)
                                    .label == s->label)
                                ++correct;
                        return static_cast<double>(correct)
                               / static_cast<double>(subset[p].size());
                    });
            }

            // Adaptation epsilons (threshold tasks and audits).
            std::vector<double> eps_adapt;
            eps_adapt.reserve(adapt.adapt_normals.size());
            for (const auto* s : adapt.adapt_normals)
                eps_adapt.push_back(detect::threshold_epsilon(*s, mean_adapt));
            std::vector<double> eps_eval;
            eps_eval.reserve(adapt.eval_set.size());
            for (const auto* s : adapt.eval_set.samples)
                eps_eval.push_back(detect::threshold_epsilon(*s, mean_adapt));

            for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
                const CvTask& task = tasks[ti];
                TaskFoldResult& res = fold.tasks[ti];
                res.outcome.pump_id = held_id;
                res.outcome.labels = labels_eval;
                res.audit.pump_id = held_id;
                auto& preds = res.outcome.predictions;
                preds.reserve(labels_eval.size());

                const bool needs_both_classes = task.policy == SelectionPolicy::Kind::optimal;
                if (needs_both_classes && task.algorithm != Algorithm::cnn
                    && !eval_has_abnormal) {
                    res.warnings.push_back(
                        "[" + to_string(task.algorithm) + "/optimal] pump '" + held_id
                        + "': evaluation set has no abnormal samples; optimal selection "
                          "impossible, pump skipped for this task");
                    continue;
                }

                switch (task.algorithm) {
                    case Algorithm::threshold: {
                        double t = 0.0;
                        if (task.policy == SelectionPolicy::Kind::optimal) {
                            // Candidate cuts at the observed epsilons plus a
                            // guard above the maximum: accuracy as a function
                            // of T only changes at sample epsilons, so this
                            // scan finds the true optimum over all T.
                            std::vector<double> cand;
                            for (double e : eps_eval)
                                if (e > 0.0) cand.push_back(e);
                            std::sort(cand.begin(), cand.end());
                            cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
                            if (!cand.empty()) cand.push_back(cand.back() * (1.0 + 1e-6));
                            else cand.push_back(DBL_MIN);
                            t = detect::select_param_optimal(
                                detect::DetectorFamily::threshold, nullptr, adapt.eval_set,
                                mean_adapt, cand);
                        } else if (task.policy == SelectionPolicy::Kind::fixed) {
                            t = fixed_t;
                        } else {
                            t = detect::select_threshold_fpr(eps_adapt, config.target_fpr);
                            res.audit.fpr_selected = true;
                        }
                        for (double e : eps_eval) preds.push_back(detect::threshold_predict(e, t));
                        res.audit.chosen = "threshold";
                        res.audit.parameter = t;
                        std::vector<int> adapt_preds;
                        for (double e : eps_adapt)
                            adapt_preds.push_back(detect::threshold_predict(e, t));
                        res.audit.adapt_fpr = fraction_positive(adapt_preds);
                        break;
                    }
                    case Algorithm::cnn: {
                        for (const auto* s : adapt.eval_set.samples)
                            preds.push_back(detect::cnn_predict(cnn_model, *s).label);
                        res.audit.chosen = "cnn";
                        std::vector<int> adapt_preds;
                        for (const auto* s : adapt.adapt_normals)
                            adapt_preds.push_back(detect::cnn_predict(cnn_model, *s).label);
                        res.audit.adapt_fpr = fraction_positive(adapt_preds);
                        break;
                    }
                    case Algorithm::ecnn: {
                        double f = 0.0;
                        if (task.policy == SelectionPolicy::Kind::optimal) {
                            f = detect::select_param_optimal(
                                detect::DetectorFamily::ecnn, &ecnn_model, adapt.eval_set,
                                mean_adapt, config.factor_grid);
                        } else if (task.policy == SelectionPolicy::Kind::fixed) {
                            f = fixed_f;
                        } else {
                            auto sel = detect::select_factor_fpr(
                                ecnn_model, adapt.adapt_normals, mean_adapt, fpr_policy);
                            if (sel) {
                                f = *sel;
                                res.audit.fpr_selected = true;
                            } else {
                                f = config.factor_grid.back();
                                res.warnings.push_back(
                                    "[ecnn/fpr] pump '" + held_id
                                    + "': no factor met the target FPR on the adaptation set; "
                                      "using the smallest grid factor");
                            }
                        }
                        for (const auto* s : adapt.eval_set.samples)
                            preds.push_back(
                                detect::ecnn_predict(ecnn_model, *s, mean_adapt, f).label);
                        res.audit.chosen = "ecnn";
                        res.audit.parameter = f;
                        std::vector<int> adapt_preds;
                        for (const auto* s : adapt.adapt_normals)
                            adapt_preds.push_back(
                                detect::ecnn_predict(ecnn_model, *s, mean_adapt, f).label);
                        res.audit.adapt_fpr = fraction_positive(adapt_preds);
                        break;
                    }
                    case Algorithm::combined: {
                        const detect::PumpProfile profile = detect::build_combined(
                            ecnn_model, held_id, adapt.adapt_normals, fpr_policy);
                        std::vector<int> adapt_preds;
                        if (profile.chosen == detect::PumpProfile::Chosen::ecnn) {
                            for (const auto* s : adapt.eval_set.samples)
                                preds.push_back(detect::ecnn_predict(ecnn_model, *s,
                                                                     profile.normal_mean,
                                                                     *profile.factor)
                                                    .label);
                            for (const auto* s : adapt.adapt_normals)
                                adapt_preds.push_back(detect::ecnn_predict(ecnn_model, *s,
                                                                           profile.normal_mean,
                                                                           *profile.factor)
                                                          .label);
                            res.audit.chosen = "ecnn";
                            res.audit.parameter = *profile.factor;
                            res.audit.fpr_selected = true;
                        } else {
                            for (const auto* s : adapt.eval_set.samples)
                                preds.push_back(detect::threshold_predict(
                                    detect::threshold_epsilon(*s, profile.normal_mean),
                                    *profile.threshold));
                            for (const auto* s : adapt.adapt_normals)
                                adapt_preds.push_back(detect::threshold_predict(
                                    detect::threshold_epsilon(*s, profile.normal_mean),
                                    *profile.threshold));
                            res.audit.chosen = "threshold";
                            res.audit.parameter = *profile.threshold;
                            res.audit.fpr_selected = true;
                            res.warnings.push_back("[combined] pump '" + held_id
                                                   + "': no factor met the target FPR; fell "
                                                     "back to the threshold detector");
                        }
                        res.audit.adapt_fpr = fraction_positive(adapt_preds);
                        break;
                    }
                }
                res.valid = true;
            }

            folds[fi] = std::move(fold);
        } catch (const std::exception& e) {
            throw std::runtime_error("fold '" + held_id + "': " + e.what());
        }
        if (config.progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            config.progress("fold " + std::to_string(fi + 1) + "/"
                            + std::to_string(plan.size()) + " (" + held_id + ") done");
        }
    };

    internal::parallel_for(plan.size(), config.jobs, run_fold);
    out.folds_run = static_cast<int>(plan.size());

    for (const auto& fold : folds)
        for (const auto& w : fold.warnings) out.warnings.push_back(w);

    const long long cnn_macs = [&] {
        nn::ModelConfig cfg = config.model;
        cfg.enhanced = false;
        return nn::count_macs(cfg);
    }();
    const long long ecnn_macs = [&] {
        nn::ModelConfig cfg = config.model;
        cfg.enhanced = true;
        return nn::count_macs(cfg);
    }();

    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        const CvTask& task = tasks[ti];
        CvRun run;
        run.task = task;

        std::optional<int> depth, kernel, channels;
        long long macs = 0;
        if (task.algorithm == Algorithm::cnn || task.algorithm == Algorithm::ecnn) {
            depth = config.model.depth;
            kernel = config.model.kernel;
            channels = config.model.channels;
            macs = task.algorithm == Algorithm::cnn ? cnn_macs : ecnn_macs;
        } else if (task.algorithm == Algorithm::combined) {
            macs = ecnn_macs; // the network half of the combined detector
        }
        const std::string algo_str = to_string(task.algorithm);
        const std::string policy_str =
            task.algorithm == Algorithm::cnn ? "none" : detect::to_string(task.policy);

        std::vector<PumpOutcome> outcomes;
        double acc_sum = 0.0, fpr_sum = 0.0;
        std::size_t fpr_count = 0, correct_total = 0, n_total = 0;
        for (const auto& fold : folds) {
            const TaskFoldResult& res = fold.tasks[ti];
            for (const auto& w : res.warnings) out.warnings.push_back(w);
            if (!res.valid) continue;
            outcomes.push_back(res.outcome);
            run.audits.push_back(res.audit);

            EvalRecord rec;
            rec.scope = res.outcome.pump_id;
            rec.algorithm = algo_str;
            rec.policy = policy_str;
            rec.depth = depth;
            rec.kernel = kernel;
            rec.channels = channels;
            rec.mac_count = macs;
            rec.accuracy = accuracy(res.outcome.predictions, res.outcome.labels);
            rec.sample_count = res.outcome.labels.size();
            try {
                rec.fpr = false_positive_rate(res.outcome.predictions, res.outcome.labels);
            } catch (const UndefinedMetricError&) {
            }
            bool has_abnormal = false, hit = false;
            for (std::size_t i = 0; i < res.outcome.labels.size(); ++i) {
                if (res.outcome.labels[i] == 1) {
                    has_abnormal = true;
                    if (res.outcome.predictions[i] == 1) hit = true;
                }
            }
            if (has_abnormal) rec.tpdr = hit ? 1.0 : 0.0;

            acc_sum += rec.accuracy;
            if (rec.fpr) {
                fpr_sum += *rec.fpr;
                ++fpr_count;
            }
            for (std::size_t i = 0; i < res.outcome.labels.size(); ++i)
                if (res.outcome.predictions[i] == res.outcome.labels[i]) ++correct_total;
            n_total += res.outcome.labels.size();
            run.records.push_back(std::move(rec));
        }

        if (outcomes.empty())
            throw UsageError("cross-validation: no fold produced results for task "
                             + algo_str + "/" + policy_str);

        run.aggregate_accuracy = acc_sum / static_cast<double>(outcomes.size());
        run.weighted_accuracy =
            static_cast<double>(correct_total) / static_cast<double>(n_total);
        if (fpr_count > 0) run.aggregate_fpr = fpr_sum / static_cast<double>(fpr_count);
        try {
            TpdrResult tpdr = true_pump_detection_rate(outcomes);
            run.aggregate_tpdr = tpdr.value;
            for (const auto& w : tpdr.warnings)
                out.warnings.push_back("[" + algo_str + "/" + policy_str + "] " + w);
        } catch (const UndefinedMetricError&) {
        }

        EvalRecord agg;
        agg.scope = "aggregate";
        agg.algorithm = algo_str;
        agg.policy = policy_str;
        agg.depth = depth;
        agg.kernel = kernel;
        agg.channels = channels;
        agg.mac_count = macs;
        agg.accuracy = run.aggregate_accuracy;
        agg.fpr = run.aggregate_fpr;
        agg.tpdr = run.aggregate_tpdr;
        agg.sample_count = n_total;
        run.records.push_back(std::move(agg));

        out.runs.push_back(std::move(run));
    }

    return out;
}

CvOutput cross_validate(const data::PumpDataset& ds, const CvTask& task,
                        const CvConfig& config) {
    return cross_validate_many(ds, std::vector<CvTask>{task}, config);
}

} // namespace pumpmon::eval
