#include "pumpmon/data/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "pumpmon/prng.hpp"

namespace pumpmon::data {

namespace {

// taylor sin(t) on |t| <= pi/2; |error| < 7e-12 at the interval edge
double sin_taylor(double t) {
    const double t2 = t * t;
    double term = t;
    double sum = t;
    const double denom[] = {6.0, 20.0, 42.0, 72.0, 110.0, 156.0, 210.0};
    for (double d : denom) {
        term = -term * t2 / d;
        sum += term;
    }
    return sum;
}

constexpr double kHalfPi = 1.57079632679489661923;

// values are quantized to 1e-6 so files are compact and byte-stable
double quantize(double v) {
    return static_cast<double>(std::llround(v * 1e6)) / 1e6;
}

} // namespace

double sin_turn(double u) {
    // quadrant fold so the polynomial only sees |t| <= pi/2
    if (u < 0.25) return sin_taylor(4.0 * u * kHalfPi);
    if (u < 0.50) return sin_taylor(4.0 * (0.5 - u) * kHalfPi);
    if (u < 0.75) return -sin_taylor(4.0 * (u - 0.5) * kHalfPi);
    return -sin_taylor(4.0 * (1.0 - u) * kHalfPi);
}

PumpDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    PumpDataset ds;
    ds.provenance = "synthetic(pumps=" + std::to_string(spec.n_pumps) +
                    ",samples=" + std::to_string(spec.samples_per_pump) + ",seed=" +
                    std::to_string(spec.seed) + ")";
    ds.pumps.reserve(static_cast<std::size_t>(spec.n_pumps));

    const int m = spec.samples_per_pump;
    const auto n_abnormal = static_cast<int>(
        std::llround(spec.abnormal_fraction * static_cast<double>(m)));
    const int n_normal = m - n_abnormal;
    const int L = kSampleLength;

    for (int pi = 0; pi < spec.n_pumps; ++pi) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "pump_%03d", pi);
        PumpSamples pump;
        pump.id = idbuf;
        pump.samples.reserve(static_cast<std::size_t>(m));

        // Per-pump stream; draw order below is a file-format contract.
        Prng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(pi)));
        const double freq = rng.uniform(5.0, 50.0);
        const double amp = rng.uniform(0.5, 2.0);
        const double phase[3] = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
        const double dc[3] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0)};
        const double sigma = spec.noise_level * amp;

        std::vector<double> impulses(static_cast<std::size_t>(L), 0.0);
        for (int j = 0; j < m; ++j) {
            const bool abnormal = j >= n_normal;
            VibrationSample s;
            s.pump_id = pump.id;
            s.label = abnormal ? 1 : 0;

            double tone = amp;
            double harmonic = 0.0;
            if (abnormal) {
                const double mult =
                    rng.uniform(0.75 * spec.severity, 1.25 * spec.severity);
                tone = amp * mult;
                // Keep the spectral signature faint: the anomaly must be
                // carried by amplitude, or a network can classify by shape
                // alone and per-pump sensitivity calibration has nothing to
                // bite on.
                harmonic = 0.10 * tone;
                impulses.assign(static_cast<std::size_t>(L), 0.0);
                const auto n_imp = 2 + rng.next_below(5); // 2..6 impacts
                for (std::uint64_t i = 0; i < n_imp; ++i) {
                    const auto pos = static_cast<std::size_t>(
                        rng.next_below(static_cast<std::uint64_t>(L)));
                    const double mag = rng.uniform(0.5, 1.5) * tone;
                    const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                    impulses[pos] += sign * mag;
                }
            }

            std::vector<double>* axes[3] = {&s.x, &s.y, &s.z};
            for (int d = 0; d < 3; ++d) {
                auto& axis = *axes[d];
                axis.resize(static_cast<std::size_t>(L));
                for (int k = 0; k < L; ++k) {
                    const double cyc = freq * static_cast<double>(k) / L;
                    double u = cyc + phase[d];
                    u -= std::floor(u);
                    double v = dc[d] + tone * sin_turn(u);
                    if (abnormal) {
                        double u2 = 2.0 * cyc + 2.0 * phase[d];
                        u2 -= std::floor(u2);
                        v += harmonic * sin_turn(u2);
                        v += impulses[static_cast<std::size_t>(k)];
                    }
                    v += sigma * rng.normal();
                    axis[static_cast<std::size_t>(k)] = quantize(v);
                }
            }
            pump.samples.push_back(std::move(s));
        }
        ds.pumps.push_back(std::move(pump));
    }
    return ds;
}

} // namespace pumpmon::data
