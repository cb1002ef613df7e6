#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pumpmon/data/synthetic.hpp"
#include "pumpmon/detectors/detectors.hpp"
#include "pumpmon/errors.hpp"
#include "pumpmon/eval/evaluation.hpp"
#include "pumpmon/nn/model_io.hpp"
#include "pumpmon/nn/train.hpp"
#include "pumpmon/prng.hpp"

namespace {

using namespace pumpmon;

struct ModelOpts {
    int depth = 4;
    int kernel = 11;
    int channels = 5;
};

struct HyperOpts {
    int epochs = 100;
    int batch = 64;
    double lr = 1e-3;
};

void add_model_options(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--depth", m.depth, "number of conv layers")->capture_default_str();
    cmd->add_option("--kernel", m.kernel, "conv kernel size (odd)")->capture_default_str();
    cmd->add_option("--channels", m.channels, "conv channels per hidden layer")
        ->capture_default_str();
}

void add_hyper_options(CLI::App* cmd, HyperOpts& h) {
    cmd->add_option("--epochs", h.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--batch", h.batch, "minibatch size")->capture_default_str();
    cmd->add_option("--lr", h.lr, "adam learning rate")->capture_default_str();
}

nn::TrainHyper make_hyper(const HyperOpts& h) {
    nn::TrainHyper hyper;
    hyper.epochs = h.epochs;
    hyper.batch_size = h.batch;
    hyper.learning_rate = h.lr;
    return hyper;
}

nn::EpochCallback epoch_progress(int epochs) {
    return [epochs](int epoch, double loss) {
        if (epoch == 1 || epoch == epochs || epoch % 10 == 0)
            std::fprintf(stderr, "epoch %d/%d loss %.6f\n", epoch, epochs, loss);
    };
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int run_generate(const data::SyntheticSpec& spec, const std::string& out_path) {
    spec.validate();
    const data::PumpDataset ds = data::generate_synthetic(spec);
    data::save_dataset(ds, out_path);
    std::size_t total = 0, abnormal = 0;
    for (const auto& pump : ds.pumps) {
        total += pump.samples.size();
        for (const auto& s : pump.samples) abnormal += (s.label == 1) ? 1u : 0u;
    }
    std::printf("wrote %zu pumps, %zu samples (%zu abnormal) to %s\n", ds.pumps.size(), total,
                abnormal, out_path.c_str());
    return 0;
}

int run_train(const std::string& data_path, const std::string& out_path,
              const std::string& algo, const ModelOpts& m, const HyperOpts& h,
              std::uint64_t seed) {
    const data::PumpDataset ds = data::load_dataset(data_path);
    const data::DatasetView all = data::view_of(ds);
    if (all.size() < 2) throw UsageError("training needs at least 2 samples");

    nn::ModelConfig cfg;
    cfg.depth = m.depth;
    cfg.kernel = m.kernel;
    cfg.channels = m.channels;
    cfg.enhanced = (algo == "ecnn");
    cfg.input_length = data::kSampleLength;
    cfg.validate();

    std::vector<nn::Tensor<float>> inputs;
    std::vector<double> targets;
    inputs.reserve(all.size());
    targets.reserve(all.size());
    if (cfg.enhanced) {
        std::vector<std::pair<std::string, data::NormalMean>> means;
        for (std::size_t pi = 0; pi < ds.pumps.size(); ++pi) {
            const data::DatasetView pv = data::view_of_pump(ds, static_cast<int>(pi));
            if (pv.count_label(0) == 0)
                throw UsageError("pump '" + ds.pumps[pi].id
                                 + "' has no normal samples; cannot build deviation channels");
            means.emplace_back(ds.pumps[pi].id, data::compute_normal_mean(pv));
        }
        auto mean_of = [&](const std::string& id) -> const data::NormalMean& {
            for (const auto& [pid, mean] : means)
                if (pid == id) return mean;
            throw UsageError("pump '" + id + "' missing from mean table");
        };
        Prng frng(derive_seed(seed, 2));
        for (const auto* s : all.samples) {
            const double f = std::exp(
                frng.uniform(std::log(detect::kTrainFactorLo), std::log(detect::kTrainFactorHi)));
            inputs.push_back(detect::build_ecnn_input<float>(*s, mean_of(s->pump_id), f));
            targets.push_back(static_cast<double>(s->label));
        }
    } else {
        for (const auto* s : all.samples) {
            inputs.push_back(detect::build_raw_input<float>(*s));
            targets.push_back(static_cast<double>(s->label));
        }
    }

    nn::TrainHyper hyper = make_hyper(h);
    hyper.seed = derive_seed(seed, 1);
    hyper.validate();
    const nn::Model<float> model =
        nn::train(inputs, targets, cfg, hyper, epoch_progress(hyper.epochs));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const int pred = nn::score_to_label(nn::forward(model, inputs[i]));
        if (pred == static_cast<int>(targets[i])) ++correct;
    }
    nn::save_model(model, out_path);
    std::printf("train accuracy: %.6f\n",
                static_cast<double>(correct) / static_cast<double>(inputs.size()));
    std::printf("mac count per inference: %lld\n", nn::count_macs(cfg));
    std::printf("model written to %s\n", out_path.c_str());
    return 0;
}

int run_crossval(const std::string& data_path, const std::string& out_path,
                 const std::string& algo, const std::string& policy, const ModelOpts& m,
                 const HyperOpts& h, double adapt_fraction, double target_fpr, int max_folds,
                 int jobs, std::uint64_t seed) {
    const data::PumpDataset ds = data::load_dataset(data_path);

    eval::CvTask task;
    task.algorithm = eval::algorithm_from_string(algo);
    task.policy = detect::policy_kind_from_string(policy);

    eval::CvConfig config;
    config.model.depth = m.depth;
    config.model.kernel = m.kernel;
    config.model.channels = m.channels;
    config.hyper = make_hyper(h);
    config.seed = seed;
    config.adapt_fraction = adapt_fraction;
    config.target_fpr = target_fpr;
    config.max_folds = max_folds;
    config.jobs = jobs;
    config.progress = [](const std::string& line) {
        std::fprintf(stderr, "%s\n", line.c_str());
    };

    const eval::CvOutput out = eval::cross_validate(ds, task, config);
    print_warnings(out.warnings);
    const eval::CvRun& run = out.runs.front();
    eval::save_records_csv(run.records, out_path);

    std::printf("folds run: %d (skipped %d)\n", out.folds_run, out.folds_skipped);
    std::printf("aggregate accuracy: %.6f\n", run.aggregate_accuracy);
    std::printf("weighted accuracy: %.6f\n", run.weighted_accuracy);
    if (run.aggregate_fpr) std::printf("aggregate fpr: %.6f\n", *run.aggregate_fpr);
    if (run.aggregate_tpdr) std::printf("pump detection rate: %.6f\n", *run.aggregate_tpdr);
    std::printf("results written to %s\n", out_path.c_str());
    return 0;
}

int run_dse_cmd(const std::string& data_path, const std::string& out_path,
                const std::string& pareto_path, std::vector<int> depths,
                std::vector<int> kernels, std::vector<int> channels, bool enhanced,
                double test_ratio, const HyperOpts& h, int jobs, std::uint64_t seed) {
    const data::PumpDataset ds = data::load_dataset(data_path);

    eval::DseGrid grid;
    if (!depths.empty()) grid.depths = std::move(depths);
    if (!kernels.empty()) grid.kernels = std::move(kernels);
    if (!channels.empty()) grid.channel_counts = std::move(channels);
    grid.enhanced = enhanced;

    eval::DseConfig config;
    config.hyper = make_hyper(h);
    config.seed = seed;
    config.test_ratio = test_ratio;
    config.jobs = jobs;
    config.progress = [](const std::string& line) {
        std::fprintf(stderr, "%s\n", line.c_str());
    };

    const eval::DseOutput out = eval::run_dse(ds, grid, config);
    print_warnings(out.warnings);
    eval::save_records_csv(out.records, out_path);
    if (!pareto_path.empty()) eval::save_records_csv(out.pareto, pareto_path);

    std::printf("evaluated %zu configurations; pareto front has %zu\n", out.records.size(),
                out.pareto.size());
    for (const auto& r : out.pareto)
        std::printf("pareto: depth=%d kernel=%d channels=%d macs=%lld accuracy=%.6f\n",
                    r.depth.value_or(0), r.kernel.value_or(0), r.channels.value_or(0),
                    r.mac_count, r.accuracy);
    std::printf("results written to %s\n", out_path.c_str());
    return 0;
}

int run_adapt(const std::string& model_path, const std::string& data_path,
              const std::string& pump_id, const std::string& out_path,
              const std::string& detector, double target_fpr, double adapt_fraction) {
    const nn::Model<float> model = nn::load_model(model_path);
    const data::PumpDataset ds = data::load_dataset(data_path);
    const int pi = ds.find_pump(pump_id);
    if (pi < 0) throw UsageError("pump '" + pump_id + "' not found in dataset");

    const data::DatasetView pump_view = data::view_of_pump(ds, pi);
    const data::AdaptSplit split = data::split_adaptation(pump_view, adapt_fraction);

    detect::SelectionPolicy policy;
    policy.kind = detect::SelectionPolicy::Kind::fpr;
    policy.target_fpr = target_fpr;
    policy.validate();

    detect::PumpProfile profile;
    if (detector == "combined") {
        profile = detect::build_combined(model, pump_id, split.adapt_normals, policy);
    } else if (detector == "ecnn") {
        profile.pump_id = pump_id;
        profile.normal_mean = data::compute_normal_mean(split.adapt_normals);
        auto sel =
            detect::select_factor_fpr(model, split.adapt_normals, profile.normal_mean, policy);
        if (!sel)
            throw std::runtime_error("no factor met the target FPR for pump '" + pump_id
                                     + "'; the combined detector would fall back to the "
                                       "threshold detector");
        profile.factor = *sel;
        profile.chosen = detect::PumpProfile::Chosen::ecnn;
    } else { // threshold
        profile.pump_id = pump_id;
        profile.normal_mean = data::compute_normal_mean(split.adapt_normals);
        std::vector<double> eps;
        for (const auto* s : split.adapt_normals)
            eps.push_back(detect::threshold_epsilon(*s, profile.normal_mean));
        profile.threshold = detect::select_threshold_fpr(eps, policy.target_fpr);
        profile.chosen = detect::PumpProfile::Chosen::threshold;
    }

    std::size_t fp = 0;
    for (const auto* s : split.adapt_normals) {
        int pred = 0;
        if (profile.chosen == detect::PumpProfile::Chosen::ecnn)
            pred = detect::ecnn_predict(model, *s, profile.normal_mean, *profile.factor).label;
        else
            pred = detect::threshold_predict(
                detect::threshold_epsilon(*s, profile.normal_mean), *profile.threshold);
        fp += (pred == 1) ? 1u : 0u;
    }
    const double adapt_fpr =
        static_cast<double>(fp) / static_cast<double>(split.adapt_normals.size());

    detect::save_profile(profile, policy, out_path);
    std::printf("chosen detector: %s\n", detect::to_string(profile.chosen).c_str());
    std::printf("parameter: %.9g\n", profile.chosen == detect::PumpProfile::Chosen::ecnn
                                         ? *profile.factor
                                         : *profile.threshold);
    std::printf("adaptation fpr: %.6f\n", adapt_fpr);
    std::printf("profile written to %s\n", out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"per-pump vibration anomaly detection"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file");

    int exit_code = 0;

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic vibration dataset");
    data::SyntheticSpec spec;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output NDJSON path")->required();
    gen->add_option("--pumps", spec.n_pumps, "number of pumps")->capture_default_str();
    gen->add_option("--samples", spec.samples_per_pump, "windows per pump")
        ->capture_default_str();
    gen->add_option("--abnormal-fraction", spec.abnormal_fraction,
                    "fraction of abnormal windows per pump")
        ->capture_default_str();
    gen->add_option("--severity", spec.severity, "abnormal amplitude multiplier midpoint")
        ->capture_default_str();
    gen->add_option("--noise", spec.noise_level, "noise sigma as fraction of base amplitude")
        ->capture_default_str();
    gen->add_option("--seed", spec.seed, "generator seed")
        ->envname("PUMPMON_SEED")
        ->capture_default_str();
    gen->callback([&] { exit_code = run_generate(spec, gen_out); });

    // train
    auto* tr = app.add_subcommand("train", "train an anomaly scoring network");
    std::string tr_data, tr_out, tr_algo = "cnn";
    ModelOpts tr_model;
    HyperOpts tr_hyper;
    std::uint64_t tr_seed = 0;
    tr->add_option("--data", tr_data, "dataset NDJSON path")->required();
    tr->add_option("--out", tr_out, "output model path")->required();
    tr->add_option("--algo", tr_algo, "cnn (raw input) or ecnn (deviation channels)")
        ->check(CLI::IsMember({"cnn", "ecnn"}))
        ->capture_default_str();
    add_model_options(tr, tr_model);
    add_hyper_options(tr, tr_hyper);
    tr->add_option("--seed", tr_seed, "training seed")
        ->envname("PUMPMON_SEED")
        ->capture_default_str();
    tr->callback(
        [&] { exit_code = run_train(tr_data, tr_out, tr_algo, tr_model, tr_hyper, tr_seed); });

    // crossval
    auto* cv = app.add_subcommand("crossval", "leave-one-pump-out cross-validation");
    std::string cv_data, cv_out, cv_algo = "combined", cv_policy = "fpr";
    ModelOpts cv_model;
    HyperOpts cv_hyper;
    double cv_adapt = 0.5, cv_target = 0.10;
    int cv_max_folds = 0, cv_jobs = 1;
    std::uint64_t cv_seed = 0;
    cv->add_option("--data", cv_data, "dataset NDJSON path")->required();
    cv->add_option("--out", cv_out, "output CSV path")->required();
    cv->add_option("--algo", cv_algo, "threshold, cnn, ecnn or combined")
        ->check(CLI::IsMember({"threshold", "cnn", "ecnn", "combined"}))
        ->capture_default_str();
    cv->add_option("--policy", cv_policy, "parameter selection policy")
        ->check(CLI::IsMember({"optimal", "fixed", "fpr"}))
        ->capture_default_str();
    add_model_options(cv, cv_model);
    add_hyper_options(cv, cv_hyper);
    cv->add_option("--adapt-fraction", cv_adapt, "fraction of a pump's normals used to adapt")
        ->capture_default_str();
    cv->add_option("--target-fpr", cv_target, "FPR budget for fpr selection")
        ->capture_default_str();
    cv->add_option("--max-folds", cv_max_folds, "cap on folds (0 = all pumps)")
        ->capture_default_str();
    cv->add_option("--jobs", cv_jobs, "parallel folds")->capture_default_str();
    cv->add_option("--seed", cv_seed, "run seed")
        ->envname("PUMPMON_SEED")
        ->capture_default_str();
    cv->callback([&] {
        exit_code = run_crossval(cv_data, cv_out, cv_algo, cv_policy, cv_model, cv_hyper,
                                 cv_adapt, cv_target, cv_max_folds, cv_jobs, cv_seed);
    });

    // dse
    auto* ds = app.add_subcommand("dse", "architecture sweep over depth/kernel/channels");
    std::string ds_data, ds_out, ds_pareto;
    std::vector<int> ds_depths, ds_kernels, ds_channels;
    bool ds_enhanced = false;
    double ds_ratio = 0.2;
    HyperOpts ds_hyper;
    int ds_jobs = 1;
    std::uint64_t ds_seed = 0;
    ds->add_option("--data", ds_data, "dataset NDJSON path")->required();
    ds->add_option("--out", ds_out, "output CSV path")->required();
    ds->add_option("--pareto-out", ds_pareto, "optional CSV for the pareto front");
    ds->add_option("--depths", ds_depths, "depth grid (default 2 4 6 8 10)");
    ds->add_option("--kernels", ds_kernels, "kernel grid (default 3 7 11 15 19 23)");
    ds->add_option("--channels", ds_channels, "channel grid (default 5 10 20 30)");
    ds->add_flag("--enhanced", ds_enhanced, "sweep with deviation channels");
    ds->add_option("--test-ratio", ds_ratio, "held-out fraction per pump and class")
        ->capture_default_str();
    add_hyper_options(ds, ds_hyper);
    ds->add_option("--jobs", ds_jobs, "parallel configurations")->capture_default_str();
    ds->add_option("--seed", ds_seed, "run seed")
        ->envname("PUMPMON_SEED")
        ->capture_default_str();
    ds->callback([&] {
        exit_code = run_dse_cmd(ds_data, ds_out, ds_pareto, ds_depths, ds_kernels, ds_channels,
                                ds_enhanced, ds_ratio, ds_hyper, ds_jobs, ds_seed);
    });

    // adapt
    auto* ad = app.add_subcommand("adapt", "select per-pump detector parameters");
    std::string ad_model, ad_data, ad_pump, ad_out, ad_detector = "combined";
    double ad_target = 0.10, ad_fraction = 0.5;
    ad->add_option("--model", ad_model, "trained model path")->required();
    ad->add_option("--data", ad_data, "dataset NDJSON path")->required();
    ad->add_option("--pump", ad_pump, "pump id to adapt")->required();
    ad->add_option("--out", ad_out, "output profile path")->required();
    ad->add_option("--detector", ad_detector, "combined, threshold or ecnn")
        ->check(CLI::IsMember({"combined", "threshold", "ecnn"}))
        ->capture_default_str();
    ad->add_option("--target-fpr", ad_target, "FPR budget")->capture_default_str();
    ad->add_option("--adapt-fraction", ad_fraction, "fraction of normals used to adapt")
        ->capture_default_str();
    ad->callback([&] {
        exit_code =
            run_adapt(ad_model, ad_data, ad_pump, ad_out, ad_detector, ad_target, ad_fraction);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}
