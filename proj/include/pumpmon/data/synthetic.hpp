#pragma once

#include <cstdint>

#include "pumpmon/data/dataset.hpp"

namespace pumpmon::data {

// Stand-in for a fleet of pumps: per pump a base tone with pump-specific
// frequency, amplitude, phase, and DC offset, plus Gaussian noise. Abnormal
// windows amplify the tone by a draw around `severity`, add a second
// harmonic and a sparse impulse train: the "faulty pumps vibrate harder"
// premise the detectors rely on.
struct SyntheticSpec {
    int n_pumps = 20;
    int samples_per_pump = 200;
    double abnormal_fraction = 2.0 / 3.0; // 1:2 normal:abnormal at default
    double severity = 2.5;                // abnormal amplitude multiplier midpoint
    double noise_level = 0.1;             // noise sigma as fraction of base amplitude
    std::uint64_t seed = 42;

    void validate() const {
        if (n_pumps <= 0) throw UsageError("n_pumps must be positive");
        if (samples_per_pump <= 0) throw UsageError("samples_per_pump must be positive");
        if (abnormal_fraction < 0.0 || abnormal_fraction > 1.0)
            throw UsageError("abnormal_fraction must lie in [0, 1]");
        if (!(severity > 1.0)) throw UsageError("severity must be greater than 1");
        if (noise_level < 0.0) throw UsageError("noise_level must be non-negative");
    }
};

PumpDataset generate_synthetic(const SyntheticSpec& spec);

// sin(2*pi*u) for u in [0, 1), evaluated with a fixed polynomial so results
// do not depend on the platform's libm. Absolute error below 1e-11.
double sin_turn(double u);

} // namespace pumpmon::data
