#include "doctest.h"

#include <cfloat>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pumpmon/data/dataset.hpp"
#include "pumpmon/detectors/detectors.hpp"
#include "pumpmon/errors.hpp"
#include "pumpmon/nn/model.hpp"
#include "pumpmon/prng.hpp"

using pumpmon::ParseError;
using pumpmon::Prng;
using pumpmon::SchemaError;
using pumpmon::StructuralError;
using pumpmon::UsageError;
namespace data = pumpmon::data;
namespace detect = pumpmon::detect;
namespace nn = pumpmon::nn;

namespace {

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

data::VibrationSample flat_sample(int label, double xv, double yv = 0.0, double zv = 0.0) {
    data::VibrationSample s;
    s.pump_id = "p";
    s.label = label;
    s.x.assign(data::kSampleLength, xv);
    s.y.assign(data::kSampleLength, yv);
    s.z.assign(data::kSampleLength, zv);
    return s;
}

// enhanced network that outputs `bias` regardless of the input
nn::Model<float> constant_model(float bias) {
    auto model = nn::make_model<float>({.depth = 2, .kernel = 1, .channels = 1,
                                        .enhanced = true, .input_length = 800});
    model.convs[1].bias[0] = bias;
    return model;
}

// enhanced network whose score is (almost exactly) the x-deviation channel
// mean: conv0 copies channel 3, batchnorm stays at its identity defaults up
// to the epsilon term, conv1 copies through
nn::Model<float> deviation_passthrough_model() {
    auto model = nn::make_model<float>({.depth = 2, .kernel = 1, .channels = 1,
                                        .enhanced = true, .input_length = 800});
    model.convs[0].w(0, 3, 0) = 1.0f;
    model.convs[1].w(0, 0, 0) = 1.0f;
    return model;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("default factor grid sweeps 100 down to 1e-3") {
    const auto grid = detect::default_factor_grid();
    REQUIRE_FALSE(grid.empty());
    CHECK(grid.front() == 100.0);
    CHECK(grid.size() == 52);
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] < grid[i - 1]);
    CHECK(grid.back() >= 1e-3);
    CHECK(grid.back() * 0.8 < 1e-3);
}

TEST_CASE("selection policy validation") {
    detect::SelectionPolicy p;
    p.validate(); // defaults are fine

    p.target_fpr = 0.0;
    CHECK_THROWS_AS(p.validate(), UsageError);
    p.target_fpr = 1.0;
    CHECK_THROWS_AS(p.validate(), UsageError);
    p.target_fpr = 0.1;

    p.kind = detect::SelectionPolicy::Kind::fixed;
    CHECK_THROWS_AS(p.validate(), UsageError); // fixed_value unset
    p.fixed_value = 2.5;
    p.validate();

    p.grid = {1.0, 1.0};
    CHECK_THROWS_AS(p.validate(), UsageError);
    p.grid = {1.0, 2.0};
    CHECK_THROWS_AS(p.validate(), UsageError);
    p.grid = {};
    CHECK_THROWS_AS(p.validate(), UsageError);

    CHECK(detect::policy_kind_from_string("optimal") == detect::SelectionPolicy::Kind::optimal);
    CHECK(detect::policy_kind_from_string("fixed") == detect::SelectionPolicy::Kind::fixed);
    CHECK(detect::policy_kind_from_string("fpr") == detect::SelectionPolicy::Kind::fpr);
    CHECK_THROWS_AS(detect::policy_kind_from_string("best"), UsageError);
}

TEST_CASE("epsilon is the mean squared deviation over all axes") {
    const data::NormalMean zero{};
    CHECK(detect::threshold_epsilon(flat_sample(0, 0.0), zero) == 0.0);
    // flat unit deviation on every axis: mean of 1^2 is 1
    CHECK(detect::threshold_epsilon(flat_sample(0, 1.0, 1.0, 1.0), zero) == doctest::Approx(1.0));
    // deviation of 2 on x only: 800 * 4 / 2400
    CHECK(detect::threshold_epsilon(flat_sample(0, 2.0), zero) == doctest::Approx(4.0 / 3.0));
    // the mean shifts the deviation
    const data::NormalMean mean{2.0, 0.0, 0.0};
    CHECK(detect::threshold_epsilon(flat_sample(0, 2.0), mean) == 0.0);

    auto bad = flat_sample(0, 0.0);
    bad.y.pop_back();
    CHECK_THROWS_AS((void)detect::threshold_epsilon(bad, zero), StructuralError);
}

TEST_CASE("epsilon scales quadratically with the deviation") {
    const data::NormalMean zero{};
    const double e1 = detect::threshold_epsilon(flat_sample(0, 1.5, -0.5, 2.0), zero);
    const double e2 = detect::threshold_epsilon(flat_sample(0, 3.0, -1.0, 4.0), zero);
    CHECK(e2 == 4.0 * e1); // doubling is exact in binary floating point
}

TEST_CASE("threshold prediction marks ties abnormal") {
    CHECK(detect::threshold_predict(0.0, 1.0) == 0);
    CHECK(detect::threshold_predict(0.999, 1.0) == 0);
    CHECK(detect::threshold_predict(1.0, 1.0) == 1);
    CHECK(detect::threshold_predict(2.0, 1.0) == 1);
    CHECK_THROWS_AS((void)detect::threshold_predict(1.0, 0.0), UsageError);
    CHECK_THROWS_AS((void)detect::threshold_predict(1.0, -1.0), UsageError);
    CHECK_THROWS_AS((void)detect::threshold_predict(1.0, std::numeric_limits<double>::infinity()),
                    UsageError);
}

TEST_CASE("threshold selection hand examples") {
    std::vector<double> eps{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    // every candidate equal to an observed epsilon keeps FPR >= 10%, so the
    // guard just above the maximum wins
    CHECK(detect::select_threshold_fpr(eps, 0.10) == 10.0 * (1.0 + 1e-6));
    // at 35% the threshold can sit on the 8th epsilon (3 of 10 at or above)
    CHECK(detect::select_threshold_fpr(eps, 0.35) == 8.0);

    CHECK(detect::select_threshold_fpr({5.0}, 0.10) == 5.0 * (1.0 + 1e-6));
    CHECK(detect::select_threshold_fpr({0.0, 0.0, 0.0}, 0.10) == DBL_MIN);

    CHECK_THROWS_AS((void)detect::select_threshold_fpr({}, 0.10), UsageError);
    CHECK_THROWS_AS((void)detect::select_threshold_fpr(eps, 0.0), UsageError);
    CHECK_THROWS_AS((void)detect::select_threshold_fpr(eps, 1.0), UsageError);
    CHECK_THROWS_AS((void)detect::select_threshold_fpr({-1.0}, 0.10), UsageError);
    CHECK_THROWS_AS((void)detect::select_threshold_fpr({std::nan("")}, 0.10), UsageError);
}

TEST_CASE("threshold selection picks the smallest qualifying candidate") {
    Prng rng(606);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.next_below(50);
        std::vector<double> eps(n);
        for (auto& e : eps) e = rng.uniform(0.0, 5.0);
        if (trial % 3 == 0 && n > 2) eps[1] = eps[0]; // exercise duplicates
        const double target = rng.uniform(0.05, 0.5);

        const double t = detect::select_threshold_fpr(eps, target);
        const auto fpr_at = [&](double cut) {
            std::size_t fp = 0;
            for (double e : eps)
                if (e >= cut) ++fp;
            return static_cast<double>(fp) / static_cast<double>(n);
        };
        CHECK(fpr_at(t) < target);
        // no observed epsilon below t would also have qualified
        for (double e : eps)
            if (e < t) CHECK(fpr_at(e) >= target);
    }
}

TEST_CASE("enhanced input layout") {
    auto s = flat_sample(0, 1.5, 0.5, -1.0);
    const data::NormalMean mean{1.0, 0.5, 0.5};

    const auto t = detect::build_ecnn_input<float>(s, mean, 2.0);
    REQUIRE(t.channels == 6);
    REQUIRE(t.length == 800);
    for (int k = 0; k < 800; ++k) {
        CHECK(t.at(0, k) == 1.5f);
        CHECK(t.at(1, k) == 0.5f);
        CHECK(t.at(2, k) == -1.0f);
        CHECK(t.at(3, k) == 1.0f);  // 2 * (1.5 - 1.0)
        CHECK(t.at(4, k) == 0.0f);  // on the mean
        CHECK(t.at(5, k) == -3.0f); // 2 * (-1.0 - 0.5)
    }

    // factor zero blanks the deviation channels
    const auto z = detect::build_ecnn_input<float>(s, mean, 0.0);
    for (int k = 0; k < 800; ++k) {
        CHECK(z.at(3, k) == 0.0f);
        CHECK(z.at(5, k) == 0.0f);
    }

    // doubling the factor exactly doubles the deviation channels
    const auto f1 = detect::build_ecnn_input<float>(s, mean, 0.7);
    const auto f2 = detect::build_ecnn_input<float>(s, mean, 1.4);
    for (int c = 3; c < 6; ++c)
        for (int k = 0; k < 800; ++k) CHECK(f2.at(c, k) == 2.0f * f1.at(c, k));

    const auto raw = detect::build_raw_input<float>(s);
    REQUIRE(raw.channels == 3);
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 800; ++k) CHECK(raw.at(c, k) == t.at(c, k));
}

TEST_CASE("detector predictions and channel checks") {
    const auto raw_model = nn::make_model<float>({.depth = 2, .kernel = 3, .channels = 2,
                                                  .enhanced = false, .input_length = 800});
    const auto enh_model = nn::make_model<float>({.depth = 2, .kernel = 3, .channels = 2,
                                                  .enhanced = true, .input_length = 800});
    const auto s = flat_sample(0, 1.0, 2.0, 3.0);
    const data::NormalMean mean{1.0, 2.0, 3.0};

    const auto p = detect::cnn_predict(raw_model, s);
    CHECK(p.raw == 0.0);
    CHECK(p.label == 0);
    const auto q = detect::ecnn_predict(enh_model, s, mean, 1.0);
    CHECK(q.raw == 0.0);
    CHECK(q.label == 0);

    const auto again = detect::ecnn_predict(enh_model, s, mean, 1.0);
    CHECK(again.raw == q.raw);

    CHECK_THROWS_AS((void)detect::cnn_predict(enh_model, s), StructuralError);
    CHECK_THROWS_AS((void)detect::ecnn_predict(raw_model, s, mean, 1.0), StructuralError);
    CHECK_THROWS_AS((void)detect::ecnn_predict(enh_model, s, mean, 0.0), UsageError);
    CHECK_THROWS_AS((void)detect::ecnn_predict(enh_model, s, mean, -2.0), UsageError);
    CHECK_THROWS_AS(
        (void)detect::ecnn_predict(enh_model, s, mean, std::numeric_limits<double>::infinity()),
        UsageError);
}

TEST_CASE("factor selection walks the grid from above") {
    detect::SelectionPolicy policy; // fpr, target 0.10, default grid
    const data::NormalMean zero{};

    const auto quiet = flat_sample(0, 0.0);
    const std::vector<data::SampleRef> adapt{&quiet};

    // a model that never fires accepts the largest factor
    const auto silent = constant_model(0.0f);
    auto f = detect::select_factor_fpr(silent, adapt, zero, policy);
    REQUIRE(f.has_value());
    CHECK(*f == 100.0);

    // a model that always fires rejects every factor
    const auto alarm = constant_model(0.5f);
    CHECK_FALSE(detect::select_factor_fpr(alarm, adapt, zero, policy).has_value());

    const auto abnormal = flat_sample(1, 0.0);
    const std::vector<data::SampleRef> tainted{&quiet, &abnormal};
    CHECK_THROWS_AS((void)detect::select_factor_fpr(silent, tainted, zero, policy), UsageError);
    CHECK_THROWS_AS((void)detect::select_factor_fpr(silent, {}, zero, policy), UsageError);
}

TEST_CASE("factor selection lands where the score drops below the cut") {
    // the passthrough model scores ~F for a unit x-deviation window, so the
    // selected factor is the first grid value below one half
    const auto model = deviation_passthrough_model();
    const auto unit_dev = flat_sample(0, 1.0);
    const std::vector<data::SampleRef> adapt{&unit_dev};
    const data::NormalMean zero{};

    detect::SelectionPolicy policy;
    const auto grid = detect::default_factor_grid();
    REQUIRE(grid[23] > 0.5);
    REQUIRE(grid[24] < 0.5);

    const auto f = detect::select_factor_fpr(model, adapt, zero, policy);
    REQUIRE(f.has_value());
    CHECK(*f == grid[24]);
}

TEST_CASE("oracle selection maximizes accuracy, ties to the larger value") {
    // flat windows with deviation d on all axes have epsilon exactly d^2
    const auto n1 = flat_sample(0, 1.0, 1.0, 1.0);
    const auto n2 = flat_sample(0, 2.0, 2.0, 2.0);
    const auto a1 = flat_sample(1, 10.0, 10.0, 10.0);
    const auto a2 = flat_sample(1, 20.0, 20.0, 20.0);
    data::DatasetView labeled;
    labeled.samples = {&n1, &n2, &a1, &a2};
    const data::NormalMean zero{};

    using detect::DetectorFamily;
    CHECK(detect::select_param_optimal(DetectorFamily::threshold, nullptr, labeled, zero,
                                       {2.0, 50.0, 200.0, 1000.0}) == 50.0);
    // 30 and 50 both classify everything correctly; the tie goes up
    CHECK(detect::select_param_optimal(DetectorFamily::threshold, nullptr, labeled, zero,
                                       {30.0, 50.0}) == 50.0);
    CHECK(detect::select_param_optimal(DetectorFamily::threshold, nullptr, labeled, zero,
                                       {50.0, 30.0}) == 50.0);

    data::DatasetView one_class;
    one_class.samples = {&n1, &n2};
    CHECK_THROWS_AS((void)detect::select_param_optimal(DetectorFamily::threshold, nullptr,
                                                       one_class, zero, {1.0}),
                    UsageError);
    CHECK_THROWS_AS((void)detect::select_param_optimal(DetectorFamily::ecnn, nullptr, labeled,
                                                       zero, {1.0}),
                    UsageError);

    // an indifferent model ties on every factor, so the largest grid value wins
    const auto silent = constant_model(0.0f);
    CHECK(detect::select_param_optimal(DetectorFamily::ecnn, &silent, labeled, zero,
                                       {1.0, 2.0, 3.0}) == 3.0);
}

TEST_CASE("combined adaptation prefers the factor sweep") {
    detect::SelectionPolicy policy;
    const auto a = flat_sample(0, 2.0, 4.0, 6.0);
    const auto b = flat_sample(0, 2.0, 4.0, 6.0);
    const std::vector<data::SampleRef> adapt{&a, &b};

    const auto silent = constant_model(0.0f);
    const auto profile = detect::build_combined(silent, "pump_003", adapt, policy);
    CHECK(profile.pump_id == "pump_003");
    CHECK(profile.chosen == detect::PumpProfile::Chosen::ecnn);
    REQUIRE(profile.factor.has_value());
    CHECK(*profile.factor == 100.0);
    CHECK_FALSE(profile.threshold.has_value());
    CHECK(profile.normal_mean.x == doctest::Approx(2.0));
    CHECK(profile.normal_mean.y == doctest::Approx(4.0));
    CHECK(profile.normal_mean.z == doctest::Approx(6.0));

    // measured adaptation FPR stays under the target
    std::size_t fp = 0;
    for (const auto* s : adapt)
        fp += detect::ecnn_predict(silent, *s, profile.normal_mean, *profile.factor).label;
    CHECK(static_cast<double>(fp) / 2.0 < policy.target_fpr);
}

TEST_CASE("combined adaptation falls back to the threshold detector") {
    detect::SelectionPolicy policy;
    const auto a = flat_sample(0, 1.0);
    const auto b = flat_sample(0, 1.1);
    const std::vector<data::SampleRef> adapt{&a, &b};

    const auto alarm = constant_model(0.5f);
    const auto profile = detect::build_combined(alarm, "pump_009", adapt, policy);
    CHECK(profile.chosen == detect::PumpProfile::Chosen::threshold);
    REQUIRE(profile.threshold.has_value());
    CHECK_FALSE(profile.factor.has_value());
    CHECK(profile.normal_mean.x == doctest::Approx(1.05));

    std::size_t fp = 0;
    for (const auto* s : adapt) {
        const double eps = detect::threshold_epsilon(*s, profile.normal_mean);
        fp += static_cast<std::size_t>(detect::threshold_predict(eps, *profile.threshold));
    }
    CHECK(static_cast<double>(fp) / 2.0 < policy.target_fpr);

    CHECK_THROWS_AS((void)detect::build_combined(alarm, "p", {}, policy), UsageError);
    const auto abnormal = flat_sample(1, 0.0);
    const std::vector<data::SampleRef> tainted{&a, &abnormal};
    CHECK_THROWS_AS((void)detect::build_combined(alarm, "p", tainted, policy), UsageError);
}

TEST_CASE("pump profiles round trip through json") {
    detect::PumpProfile profile;
    profile.pump_id = "pump_007";
    profile.normal_mean = {0.1, -0.2, 0.3};
    profile.chosen = detect::PumpProfile::Chosen::ecnn;
    profile.factor = 0.47;

    detect::SelectionPolicy policy;
    policy.target_fpr = 0.08;

    detect::save_profile(profile, policy, tmp("profile_rt.json"));
    detect::SelectionPolicy loaded_policy;
    const auto loaded = detect::load_profile(tmp("profile_rt.json"), &loaded_policy);

    CHECK(loaded.pump_id == profile.pump_id);
    CHECK(loaded.normal_mean.x == profile.normal_mean.x);
    CHECK(loaded.normal_mean.y == profile.normal_mean.y);
    CHECK(loaded.normal_mean.z == profile.normal_mean.z);
    CHECK(loaded.chosen == profile.chosen);
    REQUIRE(loaded.factor.has_value());
    CHECK(*loaded.factor == 0.47);
    CHECK_FALSE(loaded.threshold.has_value());
    CHECK(loaded_policy.kind == policy.kind);
    CHECK(loaded_policy.target_fpr == policy.target_fpr);
    CHECK(loaded_policy.grid == policy.grid);

    detect::save_profile(loaded, loaded_policy, tmp("profile_rt2.json"));
    CHECK(slurp(tmp("profile_rt.json")) == slurp(tmp("profile_rt2.json")));
}

TEST_CASE("profile files are validated on load") {
    const auto write = [](const std::string& text) {
        std::ofstream out(tmp("profile_bad.json"), std::ios::binary);
        out << text;
    };

    write("{ nope");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), ParseError);

    write("{}");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), SchemaError);

    write(R"({"format":"other"})");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), SchemaError);

    // chosen detector without its parameter
    write(R"({"format":"pumpmon-profile-v1","pump_id":"p",)"
          R"("normal_mean":{"x":0,"y":0,"z":0},"chosen_detector":"ecnn"})");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), SchemaError);

    write(R"({"format":"pumpmon-profile-v1","pump_id":"p",)"
          R"("normal_mean":{"x":0,"y":0,"z":0},"chosen_detector":"threshold",)"
          R"("threshold":-1.0})");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), SchemaError);

    write(R"({"format":"pumpmon-profile-v1","pump_id":"p",)"
          R"("normal_mean":{"x":0,"y":0,"z":0},"chosen_detector":"sonar"})");
    CHECK_THROWS_AS((void)detect::load_profile(tmp("profile_bad.json")), SchemaError);

    detect::PumpProfile bad;
    bad.pump_id = "p";
    bad.chosen = detect::PumpProfile::Chosen::threshold;
    bad.threshold = -2.0;
    CHECK_THROWS_AS((void)detect::profile_to_json(bad, detect::SelectionPolicy{}), UsageError);
}
