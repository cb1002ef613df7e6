// End-to-end checks for the pumpmon binary: spawns the real executable and
// inspects exit codes, stdout and the files it writes.
//
// usage: cli_checks <path-to-pumpmon> <scratch-dir>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "pumpmon/nn/model.hpp"
#include "pumpmon/nn/model_io.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("%s %s\n", ok ? "  [ok]" : "[FAIL]", what.c_str());
    if (!ok) ++g_failures;
}

std::string g_exe;
fs::path g_dir;

std::string path(const std::string& name) { return (g_dir / name).string(); }

// run a pumpmon invocation, capturing stdout/stderr into files
int run(const std::string& args, const std::string& tag) {
    const std::string cmd = "'" + g_exe + "' " + args + " > '" + path(tag + ".out") + "' 2> '" +
                            path(tag + ".err") + "'";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_bytes(const std::string& a, const std::string& b) { return slurp(a) == slurp(b); }

bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: cli_checks <pumpmon> <scratch-dir>\n");
        return 2;
    }
    g_exe = argv[1];
    g_dir = argv[2];
    fs::create_directories(g_dir);
    ::unsetenv("PUMPMON_SEED"); // flags below must fully pin every run

    const std::string gen_args = "--pumps 3 --samples 10 --seed 7";

    // generate: determinism and validation
    check(run("generate --out '" + path("a.ndjson") + "' " + gen_args, "gen_a") == 0,
          "generate exits 0");
    check(run("generate --out '" + path("b.ndjson") + "' " + gen_args, "gen_b") == 0,
          "generate exits 0 again");
    check(same_bytes(path("a.ndjson"), path("b.ndjson")),
          "same seed writes byte-identical datasets");
    check(run("generate --out '" + path("c.ndjson") + "' --abnormal-fraction 1.5", "gen_bad") ==
              2,
          "generate rejects an abnormal fraction above 1");

    // train: required flags, success output, determinism
    check(run("train --out '" + path("m.json") + "'", "train_noda") == 2,
          "train without --data exits 2");
    const std::string train_args = "--data '" + path("a.ndjson") +
                                   "' --algo cnn --depth 2 --kernel 3 --channels 2 "
                                   "--epochs 2 --batch 8 --seed 3";
    check(run("train " + train_args + " --out '" + path("m1.json") + "'", "train_1") == 0,
          "train exits 0");
    check(fs::exists(path("m1.json")), "train writes the model file");
    check(contains(slurp(path("train_1.out")), "mac count per inference: 19200"),
          "train reports the per-inference MAC count");
    check(run("train " + train_args + " --out '" + path("m2.json") + "'", "train_2") == 0,
          "train exits 0 on the rerun");
    check(same_bytes(path("m1.json"), path("m2.json")),
          "same seed trains a byte-identical model");

    // crossval: csv shape, determinism, thread independence, validation
    const std::string cv_args = "--data '" + path("a.ndjson") +
                                "' --algo threshold --policy fpr --seed 5";
    check(run("crossval " + cv_args + " --out '" + path("cv1.csv") + "'", "cv_1") == 0,
          "crossval exits 0");
    const auto cv_lines = lines_of(slurp(path("cv1.csv")));
    check(!cv_lines.empty() &&
              cv_lines[0] ==
                  "scope,algorithm,policy,depth,kernel,channels,mac_count,accuracy,fpr,tpdr",
          "crossval csv starts with the exact header");
    check(cv_lines.size() == 5, "crossval csv has one row per pump plus the aggregate");
    int aggregate_rows = 0;
    for (const auto& line : cv_lines)
        if (line.rfind("aggregate,", 0) == 0) ++aggregate_rows;
    check(aggregate_rows == 1, "crossval csv has exactly one aggregate row");
    check(run("crossval " + cv_args + " --out '" + path("cv2.csv") + "'", "cv_2") == 0 &&
              same_bytes(path("cv1.csv"), path("cv2.csv")),
          "crossval rerun is byte-identical");
    check(run("crossval " + cv_args + " --jobs 2 --out '" + path("cv3.csv") + "'", "cv_3") ==
                  0 &&
              same_bytes(path("cv1.csv"), path("cv3.csv")),
          "crossval output is independent of --jobs");
    check(run("crossval " + cv_args + " --algo sonar --out '" + path("cv4.csv") + "'",
              "cv_bad") == 2,
          "crossval rejects an unknown algorithm");

    // adapt: a model that alarms on everything forces the threshold fallback
    {
        auto alarm = pumpmon::nn::make_model<float>(
            {.depth = 2, .kernel = 1, .channels = 1, .enhanced = true, .input_length = 800});
        alarm.convs[1].bias[0] = 0.5f; // score 0.5 everywhere: always abnormal
        pumpmon::nn::save_model(alarm, path("alarm.json"));
    }
    const std::string adapt_args = "--model '" + path("alarm.json") + "' --data '" +
                                   path("a.ndjson") + "' --pump pump_000";
    check(run("adapt " + adapt_args + " --detector combined --out '" + path("prof.json") + "'",
              "adapt_1") == 0,
          "adapt exits 0");
    check(contains(slurp(path("adapt_1.out")), "chosen detector: threshold"),
          "combined adaptation falls back to the threshold detector");
    check(fs::exists(path("prof.json")), "adapt writes the profile");
    check(run("adapt " + adapt_args + " --detector ecnn --out '" + path("prof2.json") + "'",
              "adapt_2") == 1,
          "adapt --detector ecnn exits 1 when no factor meets the budget");
    check(run("adapt " + adapt_args + " --detector combined --pump pump_999 --out '" +
                  path("prof3.json") + "'",
              "adapt_3") == 2,
          "adapt rejects an unknown pump id");

    // corrupt input maps to the runtime-error exit code
    {
        std::ofstream out(path("broken.ndjson"), std::ios::binary);
        out << slurp(path("a.ndjson"));
        out << "{ this is not json\n";
    }
    check(run("train --data '" + path("broken.ndjson") + "' --out '" + path("m3.json") + "'",
              "train_bad") == 1,
          "a corrupt dataset line exits 1");

    // dse: results plus pareto front, front rows are a subset of the results
    const std::string dse_args = "--data '" + path("a.ndjson") +
                                 "' --depths 2 --kernels 3 --channels 1 2 "
                                 "--epochs 1 --batch 8 --seed 4";
    check(run("dse " + dse_args + " --out '" + path("dse.csv") + "' --pareto-out '" +
                  path("pareto.csv") + "'",
              "dse_1") == 0,
          "dse exits 0");
    const auto dse_lines = lines_of(slurp(path("dse.csv")));
    const auto pareto_lines = lines_of(slurp(path("pareto.csv")));
    check(dse_lines.size() == 3, "dse csv has one row per configuration");
    bool front_is_subset = pareto_lines.size() >= 2 && pareto_lines[0] == dse_lines[0];
    for (std::size_t i = 1; front_is_subset && i < pareto_lines.size(); ++i) {
        bool found = false;
        for (std::size_t j = 1; j < dse_lines.size(); ++j)
            if (pareto_lines[i] == dse_lines[j]) found = true;
        front_is_subset = found;
    }
    check(front_is_subset, "pareto rows all appear in the results csv");

    // top-level contract
    check(run("--help", "help") == 0, "--help exits 0");
    check(run("", "nocmd") == 2, "a missing subcommand exits 2");

    if (g_failures > 0) {
        std::printf("%d cli check(s) failed; see %s\n", g_failures, g_dir.string().c_str());
        return 1;
    }
    std::printf("all cli checks passed\n");
    return 0;
}
