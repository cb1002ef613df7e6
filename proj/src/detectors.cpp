#include "pumpmon/detectors/detectors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pumpmon::detect {

std::vector<double> default_factor_grid() {
    std::vector<double> grid;
    for (double v = 100.0; v >= 1e-3; v *= 0.8) grid.push_back(v);
    return grid;
}

void SelectionPolicy::validate() const {
    if (!(target_fpr > 0.0) || !(target_fpr < 1.0))
        throw UsageError("selection policy: target FPR must be in (0, 1)");
    if (kind == Kind::fixed) {
        if (!(fixed_value > 0.0) || !std::isfinite(fixed_value))
            throw UsageError("selection policy: fixed value must be positive and finite");
    }
    if (grid.empty()) throw UsageError("selection policy: empty parameter grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0) || !std::isfinite(grid[i]))
            throw UsageError("selection policy: grid values must be positive and finite");
        if (i > 0 && !(grid[i] < grid[i - 1]))
            throw UsageError("selection policy: grid must be strictly descending");
    }
}

std::string to_string(SelectionPolicy::Kind kind) {
    switch (kind) {
        case SelectionPolicy::Kind::optimal: return "optimal";
        case SelectionPolicy::Kind::fixed: return "fixed";
        case SelectionPolicy::Kind::fpr: return "fpr";
    }
    return "fpr";
}

SelectionPolicy::Kind policy_kind_from_string(const std::string& s) {
    if (s == "optimal") return SelectionPolicy::Kind::optimal;
    if (s == "fixed") return SelectionPolicy::Kind::fixed;
    if (s == "fpr") return SelectionPolicy::Kind::fpr;
    throw UsageError("unknown selection policy '" + s + "'");
}

std::string to_string(PumpProfile::Chosen chosen) {
    switch (chosen) {
        case PumpProfile::Chosen::none: return "none";
        case PumpProfile::Chosen::threshold: return "threshold";
        case PumpProfile::Chosen::ecnn: return "ecnn";
    }
    return "none";
}

double threshold_epsilon(const data::VibrationSample& sample, const data::NormalMean& mean) {
    const std::vector<double>* axes[3] = {&sample.x, &sample.y, &sample.z};
    const double mu[3] = {mean.x, mean.y, mean.z};
    double sum = 0.0;
    for (int d = 0; d < 3; ++d) {
        const auto& axis = *axes[d];
        if (axis.size() != static_cast<std::size_t>(data::kSampleLength))
            throw StructuralError("threshold_epsilon: sample axis length "
                                  + std::to_string(axis.size()));
        for (int k = 0; k < data::kSampleLength; ++k) {
            double dlt = axis[static_cast<std::size_t>(k)] - mu[d];
            sum += dlt * dlt;
        }
    }
    return sum / (3.0 * data::kSampleLength);
}

int threshold_predict(double epsilon, double threshold) {
    if (!std::isfinite(threshold) || !(threshold > 0.0))
        throw UsageError("threshold_predict: threshold not set to a positive value");
    return epsilon >= threshold ? 1 : 0;
}

double select_threshold_fpr(const std::vector<double>& adapt_epsilons, double target_fpr) {
    if (adapt_epsilons.empty())
        throw UsageError("threshold selection: no adaptation epsilons");
    if (!(target_fpr > 0.0) || !(target_fpr < 1.0))
        throw UsageError("threshold selection: target FPR must be in (0, 1)");
    for (double e : adapt_epsilons)
        if (!std::isfinite(e) || e < 0.0)
            throw UsageError("threshold selection: epsilons must be finite and non-negative");

    std::vector<double> cand = adapt_epsilons;
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    double top = cand.back();
    // Guard candidate strictly above every epsilon; if everything is zero
    // the relative bump vanishes, so use the smallest positive double.
    cand.push_back(top > 0.0 ? top * (1.0 + 1e-6) : DBL_MIN);

    const double n = static_cast<double>(adapt_epsilons.size());
    for (double t : cand) {
        std::size_t fp = 0;
        for (double e : adapt_epsilons)
            if (e >= t) ++fp;
        if (static_cast<double>(fp) / n < target_fpr) return t;
    }
    // Unreachable: the guard exceeds every epsilon, giving FPR 0.
    return cand.back();
}

Prediction cnn_predict(const nn::Model<float>& model, const data::VibrationSample& sample) {
    if (model.config.enhanced)
        throw StructuralError("cnn_predict: model expects 6 input channels, raw windows have 3");
    nn::Tensor<float> in = build_raw_input<float>(sample);
    float raw = nn::forward(model, in);
    return Prediction{static_cast<double>(raw), nn::score_to_label(raw)};
}

Prediction ecnn_predict(const nn::Model<float>& model, const data::VibrationSample& sample,
                        const data::NormalMean& mean, double factor) {
    if (!model.config.enhanced)
        throw StructuralError("ecnn_predict: model expects 3 input channels, enhanced windows have 6");
    if (!(factor > 0.0) || !std::isfinite(factor))
        throw UsageError("ecnn_predict: factor must be positive and finite");
    nn::Tensor<float> in = build_ecnn_input<float>(sample, mean, factor);
    float raw = nn::forward(model, in);
    return Prediction{static_cast<double>(raw), nn::score_to_label(raw)};
}

std::optional<double> select_factor_fpr(const nn::Model<float>& model,
                                        const std::vector<data::SampleRef>& adapt_normals,
                                        const data::NormalMean& mean,
                                        const SelectionPolicy& policy) {
    policy.validate();
    if (adapt_normals.empty())
        throw UsageError("factor selection: no adaptation samples");
    for (const auto* s : adapt_normals)
        if (s->label != 0)
            throw UsageError("factor selection: adaptation set must contain only normal samples");

    const double n = static_cast<double>(adapt_normals.size());
    for (double f : policy.grid) {
        std::size_t fp = 0;
        for (const auto* s : adapt_normals)
            if (ecnn_predict(model, *s, mean, f).label == 1) ++fp;
        if (static_cast<double>(fp) / n < policy.target_fpr) return f;
    }
    return std::nullopt;
}

double select_param_optimal(DetectorFamily family, const nn::Model<float>* model,
                            const data::DatasetView& labeled, const data::NormalMean& mean,
                            const std::vector<double>& grid) {
    if (grid.empty()) throw UsageError("optimal selection: empty parameter grid");
    if (labeled.count_label(0) == 0 || labeled.count_label(1) == 0)
        throw UsageError("optimal selection: need both normal and abnormal samples");
    if (family == DetectorFamily::ecnn && model == nullptr)
        throw UsageError("optimal selection: ecnn family needs a model");

    // Epsilons are reused across candidate thresholds.
    std::vector<double> eps;
    if (family == DetectorFamily::threshold) {
        eps.reserve(labeled.samples.size());
        for (const auto* s : labeled.samples) eps.push_back(threshold_epsilon(*s, mean));
    }

    std::size_t best_correct = 0;
    double best_value = 0.0;
    bool have_best = false;
    for (double v : grid) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw UsageError("optimal selection: grid values must be positive and finite");
        std::size_t correct = 0;
        if (family == DetectorFamily::threshold) {
            for (std::size_t i = 0; i < eps.size(); ++i)
                if (threshold_predict(eps[i], v) == labeled.samples[i]->label) ++correct;
        } else {
            for (const auto* s : labeled.samples)
                if (ecnn_predict(*model, *s, mean, v).label == s->label) ++correct;
        }
        if (!have_best || correct > best_correct
            || (correct == best_correct && v > best_value)) {
            best_correct = correct;
            best_value = v;
            have_best = true;
        }
    }
    return best_value;
}

PumpProfile build_combined(const nn::Model<float>& model, const std::string& pump_id,
                           const std::vector<data::SampleRef>& adapt_normals,
                           const SelectionPolicy& policy) {
    policy.validate();
    if (adapt_normals.empty())
        throw UsageError("combined adaptation: no adaptation samples for pump '" + pump_id + "'");

    PumpProfile profile;
    profile.pump_id = pump_id;

    // Mean over the adaptation normals (which must be all-normal).
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t count = 0;
    for (const auto* s : adapt_normals) {
        if (s->label != 0)
            throw UsageError("combined adaptation: adaptation set must contain only normal samples");
        for (double v : s->x) sx += v;
        for (double v : s->y) sy += v;
        for (double v : s->z) sz += v;
        count += static_cast<std::size_t>(data::kSampleLength);
    }
    profile.normal_mean = {sx / static_cast<double>(count), sy / static_cast<double>(count),
                           sz / static_cast<double>(count)};

    std::optional<double> f = select_factor_fpr(model, adapt_normals, profile.normal_mean, policy);
    if (f) {
        profile.factor = *f;
        profile.chosen = PumpProfile::Chosen::ecnn;
        return profile;
    }

    std::vector<double> eps;
    eps.reserve(adapt_normals.size());
    for (const auto* s : adapt_normals) eps.push_back(threshold_epsilon(*s, profile.normal_mean));
    profile.threshold = select_threshold_fpr(eps, policy.target_fpr);
    profile.chosen = PumpProfile::Chosen::threshold;
    return profile;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

} // namespace

std::string profile_to_json(const PumpProfile& profile, const SelectionPolicy& policy) {
    if (profile.threshold && (!std::isfinite(*profile.threshold) || !(*profile.threshold > 0.0)))
        throw UsageError("profile: threshold must be positive and finite");
    if (profile.factor && (!std::isfinite(*profile.factor) || !(*profile.factor > 0.0)))
        throw UsageError("profile: factor must be positive and finite");

    std::string out = "{\"format\":\"pumpmon-profile-v1\",\"pump_id\":";
    out += nlohmann::json(profile.pump_id).dump();
    out += ",\"normal_mean\":{\"x\":";
    append_double(out, profile.normal_mean.x);
    out += ",\"y\":";
    append_double(out, profile.normal_mean.y);
    out += ",\"z\":";
    append_double(out, profile.normal_mean.z);
    out += "},\"chosen_detector\":\"" + to_string(profile.chosen) + "\"";
    if (profile.threshold) {
        out += ",\"threshold\":";
        append_double(out, *profile.threshold);
    }
    if (profile.factor) {
        out += ",\"factor\":";
        append_double(out, *profile.factor);
    }
    out += ",\"policy\":{\"kind\":\"" + to_string(policy.kind) + "\",\"target_fpr\":";
    append_double(out, policy.target_fpr);
    if (policy.kind == SelectionPolicy::Kind::fixed) {
        out += ",\"fixed_value\":";
        append_double(out, policy.fixed_value);
    }
    out += ",\"grid\":[";
    for (std::size_t i = 0; i < policy.grid.size(); ++i) {
        if (i) out += ",";
        append_double(out, policy.grid[i]);
    }
    out += "]}}\n";
    return out;
}

void save_profile(const PumpProfile& profile, const SelectionPolicy& policy,
                  const std::string& path) {
    std::string text = profile_to_json(profile, policy);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw UsageError("write failed for '" + path + "'");
}

PumpProfile load_profile(const std::string& path, SelectionPolicy* policy_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("profile: ") + e.what());
    }

    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw SchemaError("profile: missing field '" + std::string(key) + "'");
        return j.at(key);
    };
    if (need("format").get<std::string>() != "pumpmon-profile-v1")
        throw SchemaError("profile: unrecognized format tag");

    PumpProfile profile;
    if (!need("pump_id").is_string()) throw SchemaError("profile: pump_id must be a string");
    profile.pump_id = j["pump_id"].get<std::string>();

    const auto& nm = need("normal_mean");
    for (const char* k : {"x", "y", "z"})
        if (!nm.contains(k) || !nm.at(k).is_number())
            throw SchemaError("profile: normal_mean needs numeric x, y, z");
    profile.normal_mean = {nm["x"].get<double>(), nm["y"].get<double>(), nm["z"].get<double>()};

    std::string chosen = need("chosen_detector").get<std::string>();
    if (chosen == "none") profile.chosen = PumpProfile::Chosen::none;
    else if (chosen == "threshold") profile.chosen = PumpProfile::Chosen::threshold;
    else if (chosen == "ecnn") profile.chosen = PumpProfile::Chosen::ecnn;
    else throw SchemaError("profile: unknown chosen_detector '" + chosen + "'");

    if (j.contains("threshold")) {
        double t = j["threshold"].get<double>();
        if (!std::isfinite(t) || !(t > 0.0))
            throw SchemaError("profile: threshold must be positive and finite");
        profile.threshold = t;
    }
    if (j.contains("factor")) {
        double f = j["factor"].get<double>();
        if (!std::isfinite(f) || !(f > 0.0))
            throw SchemaError("profile: factor must be positive and finite");
        profile.factor = f;
    }
    if (profile.chosen == PumpProfile::Chosen::threshold && !profile.threshold)
        throw SchemaError("profile: chosen_detector is threshold but no threshold stored");
    if (profile.chosen == PumpProfile::Chosen::ecnn && !profile.factor)
        throw SchemaError("profile: chosen_detector is ecnn but no factor stored");

    if (policy_out != nullptr) {
        const auto& p = need("policy");
        SelectionPolicy policy;
        if (!p.contains("kind") || !p["kind"].is_string())
            throw SchemaError("profile: policy.kind must be a string");
        policy.kind = policy_kind_from_string(p["kind"].get<std::string>());
        if (!p.contains("target_fpr") || !p["target_fpr"].is_number())
            throw SchemaError("profile: policy.target_fpr must be a number");
        policy.target_fpr = p["target_fpr"].get<double>();
        if (p.contains("fixed_value")) policy.fixed_value = p["fixed_value"].get<double>();
        if (!p.contains("grid") || !p["grid"].is_array())
            throw SchemaError("profile: policy.grid must be an array");
        policy.grid.clear();
        for (const auto& g : p["grid"]) {
            if (!g.is_number()) throw SchemaError("profile: policy.grid must be numeric");
            policy.grid.push_back(g.get<double>());
        }
        try {
            policy.validate();
        } catch (const UsageError& e) {
            throw SchemaError(std::string("profile: ") + e.what());
        }
        *policy_out = policy;
    }
    return profile;
}

} // namespace pumpmon::detect
