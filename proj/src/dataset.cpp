#include "pumpmon/data/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "pumpmon/prng.hpp"

namespace pumpmon::data {

DatasetView view_of(const PumpDataset& ds) {
    DatasetView v;
    v.samples.reserve(ds.total_samples());
    for (const auto& p : ds.pumps)
        for (const auto& s : p.samples) v.samples.push_back(&s);
    return v;
}

DatasetView view_of_pump(const PumpDataset& ds, int pump_index) {
    if (pump_index < 0 || pump_index >= static_cast<int>(ds.pumps.size()))
        throw UsageError("pump index out of range");
    DatasetView v;
    const auto& p = ds.pumps[static_cast<std::size_t>(pump_index)];
    v.samples.reserve(p.samples.size());
    for (const auto& s : p.samples) v.samples.push_back(&s);
    return v;
}

NormalMean compute_normal_mean(const std::vector<SampleRef>& samples) {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t n_normal = 0;
    for (const auto* s : samples) {
        if (s->label != 0) continue;
        ++n_normal;
        for (double v : s->x) sx += v;
        for (double v : s->y) sy += v;
        for (double v : s->z) sz += v;
    }
    if (n_normal == 0)
        throw UsageError("compute_normal_mean: no normal samples");
    const double count = static_cast<double>(n_normal) * kSampleLength;
    return {sx / count, sy / count, sz / count};
}

NormalMean compute_normal_mean(const DatasetView& view) {
    return compute_normal_mean(view.samples);
}

LopoSplit split_leave_one_pump_out(const PumpDataset& ds, const std::string& pump_id) {
    const int held = ds.find_pump(pump_id);
    if (held < 0) throw UsageError("unknown pump id: " + pump_id);
    LopoSplit split;
    for (std::size_t i = 0; i < ds.pumps.size(); ++i) {
        auto& target = (static_cast<int>(i) == held) ? split.test : split.train;
        for (const auto& s : ds.pumps[i].samples) target.samples.push_back(&s);
    }
    return split;
}

FixedSplit split_fixed(const PumpDataset& ds, double test_ratio, std::uint64_t seed) {
    if (!(test_ratio > 0.0 && test_ratio < 1.0))
        throw UsageError("test_ratio must lie strictly between 0 and 1");
    FixedSplit split;
    for (std::size_t pi = 0; pi < ds.pumps.size(); ++pi) {
        const auto& pump = ds.pumps[pi];
        Prng rng(derive_seed(seed, static_cast<std::uint64_t>(pi)));
        std::vector<std::size_t> test_marks;
        // one shuffle per class, label 0 first, both from the pump's stream
        for (int label = 0; label <= 1; ++label) {
            std::vector<std::size_t> idx;
            for (std::size_t j = 0; j < pump.samples.size(); ++j)
                if (pump.samples[j].label == label) idx.push_back(j);
            if (idx.empty()) continue;
            if (idx.size() < 2) {
                split.warnings.push_back("pump " + pump.id + ": class " +
                                         std::to_string(label) +
                                         " has fewer than 2 samples; kept in train");
                continue;
            }
            rng.shuffle(idx);
            auto take = static_cast<std::size_t>(
                std::llround(test_ratio * static_cast<double>(idx.size())));
            take = std::min(take, idx.size() - 1);
            test_marks.insert(test_marks.end(), idx.begin(), idx.begin() + take);
        }
        std::sort(test_marks.begin(), test_marks.end());
        std::size_t next_mark = 0;
        for (std::size_t j = 0; j < pump.samples.size(); ++j) {
            const bool in_test =
                next_mark < test_marks.size() && test_marks[next_mark] == j;
            if (in_test) ++next_mark;
            (in_test ? split.test : split.train).samples.push_back(&pump.samples[j]);
        }
    }
    return split;
}

AdaptSplit split_adaptation(const DatasetView& pump_samples, double adapt_fraction) {
    if (!(adapt_fraction > 0.0 && adapt_fraction < 1.0))
        throw UsageError("adapt_fraction must lie strictly between 0 and 1");
    const std::size_t n_normals = pump_samples.count_label(0);
    if (n_normals < 2)
        throw UsageError("split_adaptation: pump has fewer than 2 normal samples");
    const auto take = static_cast<std::size_t>(
        std::ceil(adapt_fraction * static_cast<double>(n_normals)));
    AdaptSplit split;
    std::size_t taken = 0;
    for (const auto* s : pump_samples.samples) {
        if (s->label == 0 && taken < take) {
            split.adapt_normals.push_back(s);
            ++taken;
        } else {
            split.eval_set.samples.push_back(s);
        }
    }
    return split;
}

} // namespace pumpmon::data
