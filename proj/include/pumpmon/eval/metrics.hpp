#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"

namespace pumpmon::eval {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// Fraction of true normals predicted abnormal. No negatives at all makes
// the rate undefined.
double false_positive_rate(const std::vector<int>& predictions, const std::vector<int>& labels);

struct PumpOutcome {
    std::string pump_id;
    std::vector<int> predictions;
    std::vector<int> labels;
};

struct TpdrResult {
    double value = 0.0;          // detected pumps / pumps with any abnormal sample
    std::vector<int> flags;      // one per counted pump, in input order
    std::vector<std::string> counted_ids;
    std::vector<std::string> warnings; // pumps excluded for having no abnormal samples
};

// True pump detection rate: a pump counts as detected if at least one of its
// abnormal samples is predicted abnormal. Pumps with no abnormal samples are
// excluded (with a warning); if every pump is excluded the metric is
// undefined.
TpdrResult true_pump_detection_rate(const std::vector<PumpOutcome>& pumps);

struct EvalRecord {
    std::string scope;     // pump id or "aggregate"
    std::string algorithm; // threshold | cnn | ecnn | combined
    std::string policy;    // optimal | fixed | fpr | none
    std::optional<int> depth;
    std::optional<int> kernel;
    std::optional<int> channels;
    long long mac_count = 0;
    double accuracy = 0.0;
    std::optional<double> fpr;  // absent when undefined
    std::optional<double> tpdr; // aggregate rate, or per-pump flag (0/1)
    std::size_t sample_count = 0; // not serialized; used for weighting
};

// CSV with a fixed header; doubles as %.6f, absent fields empty.
std::string records_to_csv(const std::vector<EvalRecord>& records);
void save_records_csv(const std::vector<EvalRecord>& records, const std::string& path);

} // namespace pumpmon::eval
