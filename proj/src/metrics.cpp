#include "pumpmon/eval/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace pumpmon::eval {

namespace {

void check_pair(const std::vector<int>& predictions, const std::vector<int>& labels,
                const char* who) {
    if (predictions.size() != labels.size())
        throw UsageError(std::string(who) + ": predictions and labels differ in length");
    if (predictions.empty()) throw UsageError(std::string(who) + ": empty input");
    for (int p : predictions)
        if (p != 0 && p != 1) throw UsageError(std::string(who) + ": predictions must be 0 or 1");
    for (int l : labels)
        if (l != 0 && l != 1) throw UsageError(std::string(who) + ": labels must be 0 or 1");
}

} // namespace

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    check_pair(predictions, labels, "accuracy");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double false_positive_rate(const std::vector<int>& predictions, const std::vector<int>& labels) {
    check_pair(predictions, labels, "false_positive_rate");
    std::size_t negatives = 0, false_positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) {
            ++negatives;
            if (predictions[i] == 1) ++false_positives;
        }
    }
    if (negatives == 0)
        throw UndefinedMetricError("false_positive_rate: no negative samples");
    return static_cast<double>(false_positives) / static_cast<double>(negatives);
}

TpdrResult true_pump_detection_rate(const std::vector<PumpOutcome>& pumps) {
    if (pumps.empty()) throw UsageError("true_pump_detection_rate: no pumps");
    TpdrResult result;
    std::size_t detected = 0;
    for (const auto& pump : pumps) {
        check_pair(pump.predictions, pump.labels, "true_pump_detection_rate");
        bool has_abnormal = false, hit = false;
        for (std::size_t i = 0; i < pump.labels.size(); ++i) {
            if (pump.labels[i] == 1) {
                has_abnormal = true;
                if (pump.predictions[i] == 1) hit = true;
            }
        }
        if (!has_abnormal) {
            result.warnings.push_back("pump '" + pump.pump_id
                                      + "' has no abnormal samples; excluded from detection rate");
            continue;
        }
        result.counted_ids.push_back(pump.pump_id);
        result.flags.push_back(hit ? 1 : 0);
        if (hit) ++detected;
    }
    if (result.counted_ids.empty())
        throw UndefinedMetricError("true_pump_detection_rate: no pump has abnormal samples");
    result.value = static_cast<double>(detected) / static_cast<double>(result.counted_ids.size());
    return result;
}

namespace {

void append_cell(std::string& out, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
}

} // namespace

std::string records_to_csv(const std::vector<EvalRecord>& records) {
    std::string out = "scope,algorithm,policy,depth,kernel,channels,mac_count,accuracy,fpr,tpdr\n";
    for (const auto& r : records) {
        out += r.scope;
        out += ',';
        out += r.algorithm;
        out += ',';
        out += r.policy;
        out += ',';
        if (r.depth) out += std::to_string(*r.depth);
        out += ',';
        if (r.kernel) out += std::to_string(*r.kernel);
        out += ',';
        if (r.channels) out += std::to_string(*r.channels);
        out += ',';
        out += std::to_string(r.mac_count);
        out += ',';
        append_cell(out, r.accuracy);
        out += ',';
        if (r.fpr) append_cell(out, *r.fpr);
        out += ',';
        if (r.tpdr) append_cell(out, *r.tpdr);
        out += '\n';
    }
    return out;
}

void save_records_csv(const std::vector<EvalRecord>& records, const std::string& path) {
    std::string text = records_to_csv(records);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot open '" + path + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw UsageError("write failed for '" + path + "'");
}

} // namespace pumpmon::eval
