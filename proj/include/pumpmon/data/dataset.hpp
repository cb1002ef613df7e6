#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pumpmon/errors.hpp"

namespace pumpmon::data {

inline constexpr int kSampleLength = 800;

// One vibration window: 800 points per axis plus a ground-truth label.
// 0 = normal, 1 = abnormal.
struct VibrationSample {
    std::string pump_id;
    std::vector<double> x, y, z;
    int label = 0;
};

struct PumpSamples {
    std::string id;
    std::vector<VibrationSample> samples;
};

// Pumps in first-seen order; sample order within a pump is stable. The
// dataset is immutable after generation/load, so views (below) stay valid.
struct PumpDataset {
    std::vector<PumpSamples> pumps;
    std::string provenance; // file path or synthetic-spec descriptor

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& p : pumps) n += p.samples.size();
        return n;
    }

    int find_pump(const std::string& id) const {
        for (std::size_t i = 0; i < pumps.size(); ++i)
            if (pumps[i].id == id) return static_cast<int>(i);
        return -1;
    }
};

// Per-axis scalar mean over all datapoints of the normal samples of one pump.
struct NormalMean {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Read-only selections over an immutable dataset.
using SampleRef = const VibrationSample*;

struct DatasetView {
    std::vector<SampleRef> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    std::size_t count_label(int label) const {
        std::size_t n = 0;
        for (const auto* s : samples) n += (s->label == label) ? 1u : 0u;
        return n;
    }
};

DatasetView view_of(const PumpDataset& ds);
DatasetView view_of_pump(const PumpDataset& ds, int pump_index);

// Mean over the 800 * (#normals) datapoints per axis; abnormal samples in
// the input are ignored.
NormalMean compute_normal_mean(const std::vector<SampleRef>& samples);
NormalMean compute_normal_mean(const DatasetView& view);

struct LopoSplit {
    DatasetView train, test;
};
LopoSplit split_leave_one_pump_out(const PumpDataset& ds, const std::string& pump_id);

struct FixedSplit {
    DatasetView train, test;
    std::vector<std::string> warnings;
};
// Per-pump, per-class stratified split. A class with fewer than 2 samples
// in a pump goes wholly to train (warning). Deterministic from seed.
FixedSplit split_fixed(const PumpDataset& ds, double test_ratio, std::uint64_t seed);

struct AdaptSplit {
    std::vector<SampleRef> adapt_normals;
    DatasetView eval_set;
};
// First ceil(adapt_fraction * #normals) normals (stored order) become the
// adaptation set; everything else is the evaluation set.
AdaptSplit split_adaptation(const DatasetView& pump_samples, double adapt_fraction = 0.5);

// NDJSON, one sample per line; see README for the exact schema.
void save_dataset(const PumpDataset& ds, const std::string& path);
PumpDataset load_dataset(const std::string& path);

} // namespace pumpmon::data
