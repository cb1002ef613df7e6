#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pumpmon/data/dataset.hpp"
#include "pumpmon/errors.hpp"
#include "pumpmon/nn/model.hpp"

namespace pumpmon::detect {

// Geometric sweep 100, 80, 64, ... down to 1e-3 (ratio 0.8): the "start
// high, slowly reduce" schedule used by FPR-based selection.
std::vector<double> default_factor_grid();

struct SelectionPolicy {
    enum class Kind { optimal, fixed, fpr };
    Kind kind = Kind::fpr;
    double target_fpr = 0.10;
    std::vector<double> grid = default_factor_grid();
    double fixed_value = 0.0; // set when kind == fixed

    void validate() const;
};

std::string to_string(SelectionPolicy::Kind kind);
SelectionPolicy::Kind policy_kind_from_string(const std::string& s);

// Everything a deployed pump needs: its normal mean and the selected
// detector parameter(s).
struct PumpProfile {
    enum class Chosen { none, threshold, ecnn };

    std::string pump_id;
    data::NormalMean normal_mean;
    std::optional<double> threshold; // T_i
    std::optional<double> factor;    // F_i
    Chosen chosen = Chosen::none;
};

std::string to_string(PumpProfile::Chosen chosen);

// Mean squared deviation from the per-axis normal mean over all 3 x 800
// entries of a window.
double threshold_epsilon(const data::VibrationSample& sample, const data::NormalMean& mean);

// Abnormal iff epsilon >= T (ties abnormal).
int threshold_predict(double epsilon, double threshold);

// Smallest candidate T (sorted unique adaptation epsilons plus a guard just
// above the maximum) whose FPR over the adaptation values is strictly below
// target. The guard keeps the result well-defined even when no epsilon
// qualifies; an all-zero adaptation set falls back to the smallest positive
// double so T stays positive.
double select_threshold_fpr(const std::vector<double>& adapt_epsilons, double target_fpr);

// Training-time factor distribution: each training sample sees its deviation
// channels scaled by a log-uniform draw from this range. The upper end must
// reach the top of the inference-time sweep grid, or the network's response
// at large factors is extrapolation and can invert (alarming at moderate
// factors but staying quiet at the grid top, which the descending sweep then
// selects blindly). The range must also stay narrow enough that deviation
// magnitude keeps its correlation with the label; spreading it over several
// decades washes that signal out and the sweep has nothing to calibrate.
constexpr double kTrainFactorLo = 10.0;
constexpr double kTrainFactorHi = 100.0;

// Channels 0-2: raw x, y, z. Channels 3-5: F * (value - mean) per axis.
// Deviations are computed in double and cast to S last.
template <typename S>
nn::Tensor<S> build_ecnn_input(const data::VibrationSample& sample,
                               const data::NormalMean& mean, double factor) {
    nn::Tensor<S> t(6, data::kSampleLength);
    const std::vector<double>* axes[3] = {&sample.x, &sample.y, &sample.z};
    const double mu[3] = {mean.x, mean.y, mean.z};
    for (int d = 0; d < 3; ++d) {
        S* raw = t.row(d);
        S* dev = t.row(d + 3);
        const auto& axis = *axes[d];
        for (int k = 0; k < data::kSampleLength; ++k) {
            raw[k] = static_cast<S>(axis[static_cast<std::size_t>(k)]);
            dev[k] = static_cast<S>(factor * (axis[static_cast<std::size_t>(k)] - mu[d]));
        }
    }
    return t;
}

// 3-channel raw input for the default CNN.
template <typename S>
nn::Tensor<S> build_raw_input(const data::VibrationSample& sample) {
    nn::Tensor<S> t(3, data::kSampleLength);
    const std::vector<double>* axes[3] = {&sample.x, &sample.y, &sample.z};
    for (int d = 0; d < 3; ++d) {
        S* raw = t.row(d);
        const auto& axis = *axes[d];
        for (int k = 0; k < data::kSampleLength; ++k)
            raw[k] = static_cast<S>(axis[static_cast<std::size_t>(k)]);
    }
    return t;
}

struct Prediction {
    double raw = 0.0;
    int label = 0;
};

Prediction cnn_predict(const nn::Model<float>& model, const data::VibrationSample& sample);
Prediction ecnn_predict(const nn::Model<float>& model, const data::VibrationSample& sample,
                        const data::NormalMean& mean, double factor);

// Walk the descending grid; return the first (largest) F whose FPR over the
// adaptation normals is strictly below target, or nothing if no grid point
// qualifies.
std::optional<double> select_factor_fpr(const nn::Model<float>& model,
                                        const std::vector<data::SampleRef>& adapt_normals,
                                        const data::NormalMean& mean,
                                        const SelectionPolicy& policy);

enum class DetectorFamily { threshold, ecnn };

// Oracle selection: the grid value maximizing accuracy on labeled samples,
// ties toward the larger value. Needs both classes present. `model` is used
// by the ecnn family only; `mean` feeds epsilon / input building.
double select_param_optimal(DetectorFamily family, const nn::Model<float>* model,
                            const data::DatasetView& labeled, const data::NormalMean& mean,
                            const std::vector<double>& grid);

// FPR-based selection for one pump. Tries the ECNN factor sweep first; if
// no F reaches the target FPR, falls back to the threshold detector. The
// normal mean is computed from the adaptation normals.
PumpProfile build_combined(const nn::Model<float>& model, const std::string& pump_id,
                           const std::vector<data::SampleRef>& adapt_normals,
                           const SelectionPolicy& policy);

// Profile JSON (includes the policy used).
std::string profile_to_json(const PumpProfile& profile, const SelectionPolicy& policy);
void save_profile(const PumpProfile& profile, const SelectionPolicy& policy,
                  const std::string& path);
PumpProfile load_profile(const std::string& path, SelectionPolicy* policy_out = nullptr);

} // namespace pumpmon::detect
