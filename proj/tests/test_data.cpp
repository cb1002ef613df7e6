#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pumpmon/data/dataset.hpp"
#include "pumpmon/data/synthetic.hpp"
#include "pumpmon/errors.hpp"

using pumpmon::ParseError;
using pumpmon::SchemaError;
using pumpmon::UsageError;
namespace data = pumpmon::data;

namespace {

std::string tmp(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

data::VibrationSample flat_sample(const std::string& id, int label, double xv,
                                  double yv = 0.0, double zv = 0.0) {
    data::VibrationSample s;
    s.pump_id = id;
    s.label = label;
    s.x.assign(data::kSampleLength, xv);
    s.y.assign(data::kSampleLength, yv);
    s.z.assign(data::kSampleLength, zv);
    return s;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json sample_line(const std::string& id, int label, std::size_t nx = 800,
                           std::size_t ny = 800, std::size_t nz = 800) {
    nlohmann::json j;
    j["pump_id"] = id;
    j["label"] = label;
    j["x"] = std::vector<double>(nx, 0.0);
    j["y"] = std::vector<double>(ny, 0.0);
    j["z"] = std::vector<double>(nz, 0.0);
    return j;
}

} // namespace

TEST_CASE("generator produces the requested fleet") {
    data::SyntheticSpec spec;
    spec.n_pumps = 3;
    spec.samples_per_pump = 10;
    const auto ds = data::generate_synthetic(spec);

    REQUIRE(ds.pumps.size() == 3);
    CHECK(ds.pumps[0].id == "pump_000");
    CHECK(ds.pumps[1].id == "pump_001");
    CHECK(ds.pumps[2].id == "pump_002");
    CHECK(ds.total_samples() == 30);

    for (const auto& pump : ds.pumps) {
        REQUIRE(pump.samples.size() == 10);
        // default fraction 2/3 rounds to 7 abnormal; normals come first
        int flips = 0;
        int abnormal = 0;
        for (std::size_t i = 0; i < pump.samples.size(); ++i) {
            const auto& s = pump.samples[i];
            CHECK(s.pump_id == pump.id);
            REQUIRE(s.x.size() == 800);
            REQUIRE(s.y.size() == 800);
            REQUIRE(s.z.size() == 800);
            abnormal += s.label;
            if (i > 0 && s.label != pump.samples[i - 1].label) ++flips;
        }
        CHECK(abnormal == 7);
        CHECK(flips == 1);
    }
}

TEST_CASE("abnormal fraction zero keeps every window normal") {
    data::SyntheticSpec spec;
    spec.n_pumps = 2;
    spec.samples_per_pump = 6;
    spec.abnormal_fraction = 0.0;
    const auto ds = data::generate_synthetic(spec);
    for (const auto& pump : ds.pumps)
        for (const auto& s : pump.samples) CHECK(s.label == 0);
}

TEST_CASE("generator output is seed-deterministic") {
    data::SyntheticSpec spec;
    spec.n_pumps = 2;
    spec.samples_per_pump = 4;
    data::save_dataset(data::generate_synthetic(spec), tmp("data_gen_a.ndjson"));
    data::save_dataset(data::generate_synthetic(spec), tmp("data_gen_b.ndjson"));
    CHECK(slurp(tmp("data_gen_a.ndjson")) == slurp(tmp("data_gen_b.ndjson")));

    spec.seed = 43;
    data::save_dataset(data::generate_synthetic(spec), tmp("data_gen_c.ndjson"));
    CHECK(slurp(tmp("data_gen_a.ndjson")) != slurp(tmp("data_gen_c.ndjson")));
}

TEST_CASE("dataset files round trip exactly") {
    data::SyntheticSpec spec;
    spec.n_pumps = 2;
    spec.samples_per_pump = 4;
    const auto ds = data::generate_synthetic(spec);
    data::save_dataset(ds, tmp("data_rt.ndjson"));
    const auto loaded = data::load_dataset(tmp("data_rt.ndjson"));

    REQUIRE(loaded.pumps.size() == ds.pumps.size());
    for (std::size_t p = 0; p < ds.pumps.size(); ++p) {
        CHECK(loaded.pumps[p].id == ds.pumps[p].id);
        REQUIRE(loaded.pumps[p].samples.size() == ds.pumps[p].samples.size());
        for (std::size_t i = 0; i < ds.pumps[p].samples.size(); ++i) {
            const auto& a = ds.pumps[p].samples[i];
            const auto& b = loaded.pumps[p].samples[i];
            CHECK(a.label == b.label);
            CHECK(a.x == b.x);
            CHECK(a.y == b.y);
            CHECK(a.z == b.z);
        }
    }

    data::save_dataset(loaded, tmp("data_rt2.ndjson"));
    CHECK(slurp(tmp("data_rt.ndjson")) == slurp(tmp("data_rt2.ndjson")));
}

TEST_CASE("loader groups interleaved pump lines by id") {
    std::ofstream out(tmp("data_interleaved.ndjson"));
    out << sample_line("a", 0).dump() << "\n";
    out << sample_line("b", 0).dump() << "\n";
    out << sample_line("a", 1).dump() << "\n";
    out.close();
    const auto ds = data::load_dataset(tmp("data_interleaved.ndjson"));
    REQUIRE(ds.pumps.size() == 2);
    CHECK(ds.pumps[0].id == "a");
    CHECK(ds.pumps[0].samples.size() == 2);
    CHECK(ds.pumps[1].samples.size() == 1);
}

TEST_CASE("loader reports the offending line on a syntax error") {
    std::ofstream out(tmp("data_syntax.ndjson"));
    out << sample_line("a", 0).dump() << "\n";
    out << sample_line("a", 0).dump() << "\n";
    out << "{{{ nope\n";
    out.close();
    try {
        (void)data::load_dataset(tmp("data_syntax.ndjson"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("loader rejects numbers that overflow a double") {
    std::ofstream out(tmp("data_overflow.ndjson"));
    auto j = sample_line("a", 0);
    std::string text = j.dump();
    // swap the first x value for an overflowing literal
    const auto pos = text.find("\"x\":[0.0");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 8, "\"x\":[1e999");
    out << text << "\n";
    out.close();
    CHECK_THROWS_AS((void)data::load_dataset(tmp("data_overflow.ndjson")), ParseError);
}

TEST_CASE("loader enforces the sample schema") {
    const auto write_one = [](const nlohmann::json& j) {
        std::ofstream out(tmp("data_schema.ndjson"));
        out << j.dump() << "\n";
    };

    auto short_x = sample_line("pump_a", 0, 799);
    write_one(short_x);
    try {
        (void)data::load_dataset(tmp("data_schema.ndjson"));
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pump_a") != std::string::npos);
        CHECK(msg.find("'x'") != std::string::npos);
    }

    write_one(sample_line("pump_a", 2));
    CHECK_THROWS_AS((void)data::load_dataset(tmp("data_schema.ndjson")), SchemaError);

    auto no_id = sample_line("pump_a", 0);
    no_id.erase("pump_id");
    write_one(no_id);
    CHECK_THROWS_AS((void)data::load_dataset(tmp("data_schema.ndjson")), SchemaError);

    auto no_axis = sample_line("pump_a", 0);
    no_axis.erase("z");
    write_one(no_axis);
    CHECK_THROWS_AS((void)data::load_dataset(tmp("data_schema.ndjson")), SchemaError);

    auto float_label = sample_line("pump_a", 0);
    float_label["label"] = 0.5;
    write_one(float_label);
    CHECK_THROWS_AS((void)data::load_dataset(tmp("data_schema.ndjson")), SchemaError);
}

TEST_CASE("an empty file loads as an empty dataset") {
    std::ofstream(tmp("data_empty.ndjson")).close();
    const auto ds = data::load_dataset(tmp("data_empty.ndjson"));
    CHECK(ds.pumps.empty());
    CHECK(ds.total_samples() == 0);
}

TEST_CASE("normal mean averages only normal windows") {
    data::PumpDataset ds;
    ds.pumps.push_back({"p", {}});
    auto& samples = ds.pumps[0].samples;
    samples.push_back(flat_sample("p", 0, 2.0, 2.0, 2.0));
    samples.push_back(flat_sample("p", 0, 2.0, 2.0, 2.0));
    const auto view = data::view_of(ds);

    auto mean = data::compute_normal_mean(view);
    CHECK(mean.x == doctest::Approx(2.0));
    CHECK(mean.y == doctest::Approx(2.0));
    CHECK(mean.z == doctest::Approx(2.0));

    samples.push_back(flat_sample("p", 1, 1e6, 1e6, 1e6)); // ignored
    auto with_abnormal = data::compute_normal_mean(data::view_of(ds));
    CHECK(with_abnormal.x == doctest::Approx(2.0));

    samples[1] = flat_sample("p", 0, 4.0, 0.0, -2.0);
    auto mixed = data::compute_normal_mean(data::view_of(ds));
    CHECK(mixed.x == doctest::Approx(3.0));
    CHECK(mixed.y == doctest::Approx(1.0));
    CHECK(mixed.z == doctest::Approx(0.0));

    data::PumpDataset none;
    none.pumps.push_back({"q", {flat_sample("q", 1, 0.0)}});
    CHECK_THROWS_AS((void)data::compute_normal_mean(data::view_of(none)), UsageError);
}

TEST_CASE("leave-one-pump-out keeps the fleet partitioned") {
    data::SyntheticSpec spec;
    spec.n_pumps = 3;
    spec.samples_per_pump = 4;
    const auto ds = data::generate_synthetic(spec);

    const auto split = data::split_leave_one_pump_out(ds, "pump_001");
    CHECK(split.test.size() == 4);
    CHECK(split.train.size() == 8);
    for (const auto* s : split.test.samples) CHECK(s->pump_id == "pump_001");
    for (const auto* s : split.train.samples) CHECK(s->pump_id != "pump_001");

    std::set<data::SampleRef> seen;
    for (const auto* s : split.train.samples) seen.insert(s);
    for (const auto* s : split.test.samples) seen.insert(s);
    CHECK(seen.size() == ds.total_samples());

    CHECK_THROWS_AS((void)data::split_leave_one_pump_out(ds, "pump_999"), UsageError);
}

TEST_CASE("fixed split is stratified per pump and class") {
    data::PumpDataset ds;
    ds.pumps.push_back({"p", {}});
    auto& samples = ds.pumps[0].samples;
    for (int i = 0; i < 10; ++i) samples.push_back(flat_sample("p", 0, i));
    for (int i = 0; i < 10; ++i) samples.push_back(flat_sample("p", 1, 100 + i));

    const auto split = data::split_fixed(ds, 0.2, 7);
    CHECK(split.warnings.empty());
    CHECK(split.test.size() == 4);
    CHECK(split.train.size() == 16);
    CHECK(split.test.count_label(0) == 2);
    CHECK(split.test.count_label(1) == 2);

    // deterministic: the same seed picks the same members
    const auto again = data::split_fixed(ds, 0.2, 7);
    CHECK(again.test.samples == split.test.samples);

    std::set<data::SampleRef> seen;
    for (const auto* s : split.train.samples) seen.insert(s);
    for (const auto* s : split.test.samples) seen.insert(s);
    CHECK(seen.size() == 20);

    CHECK_THROWS_AS((void)data::split_fixed(ds, 0.0, 7), UsageError);
    CHECK_THROWS_AS((void)data::split_fixed(ds, 1.0, 7), UsageError);
}

TEST_CASE("fixed split keeps undersized classes in train with a warning") {
    data::PumpDataset ds;
    ds.pumps.push_back({"p", {}});
    auto& samples = ds.pumps[0].samples;
    for (int i = 0; i < 6; ++i) samples.push_back(flat_sample("p", 0, i));
    samples.push_back(flat_sample("p", 1, 50.0)); // lone abnormal

    const auto split = data::split_fixed(ds, 0.25, 3);
    REQUIRE(split.warnings.size() == 1);
    CHECK(split.warnings[0].find("p") != std::string::npos);
    CHECK(split.test.count_label(1) == 0);
    CHECK(split.train.count_label(1) == 1);
    CHECK(split.test.count_label(0) == 2); // llround(0.25 * 6)
}

TEST_CASE("adaptation split takes leading normals only") {
    data::PumpDataset ds;
    ds.pumps.push_back({"p", {}});
    auto& samples = ds.pumps[0].samples;
    for (int i = 0; i < 10; ++i) samples.push_back(flat_sample("p", 0, i));
    for (int i = 0; i < 20; ++i) samples.push_back(flat_sample("p", 1, 100 + i));
    const auto view = data::view_of(ds);

    const auto split = data::split_adaptation(view, 0.5);
    REQUIRE(split.adapt_normals.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(split.adapt_normals[i]->label == 0);
        CHECK(split.adapt_normals[i]->x[0] == doctest::Approx(static_cast<double>(i)));
    }
    CHECK(split.eval_set.size() == 25);
    CHECK(split.eval_set.count_label(0) == 5);
    CHECK(split.eval_set.count_label(1) == 20);

    std::set<data::SampleRef> overlap(split.adapt_normals.begin(), split.adapt_normals.end());
    for (const auto* s : split.eval_set.samples) CHECK(overlap.count(s) == 0);

    CHECK_THROWS_AS((void)data::split_adaptation(view, 0.0), UsageError);
    CHECK_THROWS_AS((void)data::split_adaptation(view, 1.0), UsageError);

    data::PumpDataset one;
    one.pumps.push_back({"q", {flat_sample("q", 0, 0.0)}});
    CHECK_THROWS_AS((void)data::split_adaptation(data::view_of(one), 0.5), UsageError);
}

TEST_CASE("pump views reject bad indices") {
    data::SyntheticSpec spec;
    spec.n_pumps = 2;
    spec.samples_per_pump = 2;
    const auto ds = data::generate_synthetic(spec);
    CHECK(data::view_of_pump(ds, 1).size() == 2);
    CHECK_THROWS_AS((void)data::view_of_pump(ds, 2), UsageError);
    CHECK_THROWS_AS((void)data::view_of_pump(ds, -1), UsageError);
}

TEST_CASE("portable sine agrees with the standard library") {
    for (int k = 0; k <= 1000; ++k) {
        const double u = k / 1001.0;
        CHECK(std::abs(data::sin_turn(u) - std::sin(2.0 * std::numbers::pi * u)) < 1e-9);
    }
}
