#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "cmanomaly/dataset.hpp"
#include "cmanomaly/model_io.hpp"
#include "cmanomaly/preprocess.hpp"
#include "cmanomaly/reports.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace cmanomaly;
using Catch::Matchers::ContainsSubstring;

namespace {

struct RunResult {
    int code = -1;
    std::string output; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + CMANOMALY_CLI_PATH + "\" " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed for: " + cmd);
    RunResult r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// A small but learnable fixture series saved as a headered CSV.
std::filesystem::path write_series_csv(const testsupport::TempDir& dir, const std::string& name,
                                       std::size_t T, std::uint64_t seed) {
    MetricDataset ds;
    ds.name = "fixture";
    ds.values = testsupport::make_clean_series(T, 3, seed, 0.01);
    ds.metric_names = {"cpu", "mem", "io"};
    const auto path = dir.file(name);
    save_csv(ds, path);
    return path;
}

std::filesystem::path write_labels(const testsupport::TempDir& dir, const std::string& name,
                                   std::size_t T, std::size_t lo, std::size_t hi) {
    std::string text;
    for (std::size_t t = 0; t < T; ++t) text += (t >= lo && t < hi) ? "1\n" : "0\n";
    return testsupport::write_file(dir.file(name), text);
}

double parse_report_value(const std::string& report_text, const std::string& key) {
    const std::string needle = key + "=";
    const std::size_t at = report_text.find(needle);
    REQUIRE(at != std::string::npos);
    return std::stod(report_text.substr(at + needle.size()));
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

} // namespace

TEST_CASE("usage errors exit with code 2, help with 0") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("--bogus-flag").code == 2);
    CHECK(run_cli("train --no-such-option").code == 2);

    RunResult help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK_THAT(help.output, ContainsSubstring("train"));
    CHECK_THAT(help.output, ContainsSubstring("detect"));
    CHECK_THAT(help.output, ContainsSubstring("evaluate"));
    CHECK_THAT(help.output, ContainsSubstring("bench"));
    CHECK(run_cli("train --help").code == 0);

    RunResult no_data = run_cli("train");
    CHECK(no_data.code == 2);
    CHECK_THAT(no_data.output, ContainsSubstring("no input data"));

    RunResult missing = run_cli("train --data /nonexistent/series.csv");
    CHECK(missing.code == 2);
}

TEST_CASE("the full pipeline runs and reruns byte-identically") {
    testsupport::TempDir dir("cli_pipeline");
    const auto train_csv = write_series_csv(dir, "train.csv", 160, 5);
    const auto test_csv = write_series_csv(dir, "test.csv", 160, 6);
    const auto labels = write_labels(dir, "labels.txt", 160, 100, 120);
    const auto config = testsupport::write_file(dir.file("config.json"),
                                                R"({"hidden_widths": [16], "max_epochs": 40})");

    const std::string train_args =
        " --config " + q(config) + " --omega 8 --tau-train 2 --seed 3 --out ";
    RunResult t1 = run_cli("train --data " + q(train_csv) + train_args + q(dir.file("run1")));
    INFO(t1.output);
    REQUIRE(t1.code == 0);
    CHECK_THAT(t1.output, ContainsSubstring("trained"));
    CHECK(std::filesystem::exists(dir.file("run1/model.cmam")));
    CHECK(std::filesystem::exists(dir.file("run1/loss_history.csv")));
    CHECK(std::filesystem::exists(dir.file("run1/manifest.json")));

    RunResult t2 = run_cli("train --data " + q(train_csv) + train_args + q(dir.file("run2")));
    REQUIRE(t2.code == 0);
    CHECK(testsupport::read_file(dir.file("run1/model.cmam")) ==
          testsupport::read_file(dir.file("run2/model.cmam")));
    // Identical up to the out-directory paths: compare the epoch/loss summary line.
    CHECK(t1.output.substr(0, t1.output.find('\n')) == t2.output.substr(0, t2.output.find('\n')));

    RunResult d1 = run_cli("detect --data " + q(test_csv) + " --model " +
                           q(dir.file("run1/model.cmam")) + " --out " + q(dir.file("det1")));
    INFO(d1.output);
    REQUIRE(d1.code == 0);
    CHECK_THAT(d1.output, ContainsSubstring("scored"));
    const std::string scores_text = testsupport::read_file(dir.file("det1/scores.csv"));
    CHECK(count_lines(scores_text) == 1 + window_count(160, 8, 1)); // header + one row per window

    RunResult d2 = run_cli("detect --data " + q(test_csv) + " --model " +
                           q(dir.file("run1/model.cmam")) + " --out " + q(dir.file("det2")));
    REQUIRE(d2.code == 0);
    CHECK(testsupport::read_file(dir.file("det2/scores.csv")) == scores_text);

    RunResult e1 = run_cli("evaluate " + q(dir.file("det1/scores.csv")) + " --labels " + q(labels) +
                           " --out " + q(dir.file("eval1")));
    INFO(e1.output);
    REQUIRE(e1.code == 0);
    CHECK_THAT(e1.output, ContainsSubstring("best threshold="));
    for (int k = 0; k <= 10; ++k)
        CHECK(std::filesystem::exists(dir.file("eval1/report_" + std::to_string(k) + ".txt")));
    CHECK(std::filesystem::exists(dir.file("eval1/best_report.txt")));
    const std::string sweep_text = testsupport::read_file(dir.file("eval1/sweep.csv"));
    CHECK(count_lines(sweep_text) == 12); // header + 11 grid thresholds

    RunResult e2 = run_cli("evaluate " + q(dir.file("det1/scores.csv")) + " --labels " + q(labels) +
                           " --no-adjust --out " + q(dir.file("eval2")));
    REQUIRE(e2.code == 0);
    const double f1_adjusted =
        parse_report_value(testsupport::read_file(dir.file("eval1/best_report.txt")), "f1");
    const double f1_raw =
        parse_report_value(testsupport::read_file(dir.file("eval2/best_report.txt")), "f1");
    CHECK(f1_adjusted >= f1_raw); // adjustment can only add true positives

    const std::string manifest_text = testsupport::read_file(dir.file("eval2/manifest.json"));
    CHECK_THAT(manifest_text, ContainsSubstring("\"adjust\": false"));
    CHECK_THAT(manifest_text, ContainsSubstring("\"command\": \"evaluate\""));
}

TEST_CASE("the ablation flag produces a narrower model") {
    testsupport::TempDir dir("cli_ablate");
    const auto train_csv = write_series_csv(dir, "train.csv", 120, 9);
    RunResult r = run_cli("train --data " + q(train_csv) +
                          " --omega 8 --tau-train 2 --ablate-cm --out " + q(dir.file("out")));
    INFO(r.output);
    REQUIRE(r.code == 0);
    ForecastModel model = load_model(dir.file("out/model.cmam").string());
    CHECK(model.options.ablate_cm);
    CHECK(model.input_width() == 3);

    const std::string manifest_text = testsupport::read_file(dir.file("out/manifest.json"));
    CHECK_THAT(manifest_text, ContainsSubstring("\"ablate_cm\": true"));
}

TEST_CASE("headerless whitespace matrices are accepted as data") {
    testsupport::TempDir dir("cli_smd");
    Matrix values = testsupport::make_clean_series(120, 3, 13, 0.01);
    std::string text;
    for (std::size_t t = 0; t < 120; ++t) {
        for (std::size_t k = 0; k < 3; ++k)
            text += (k ? "," : "") + detail::format_double(values(t, k));
        text += "\n";
    }
    const auto data = testsupport::write_file(dir.file("entity.txt"), text);
    RunResult r = run_cli("train --data " + q(data) + " --omega 8 --tau-train 2 --out " +
                          q(dir.file("out")));
    INFO(r.output);
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(dir.file("out/model.cmam")));
}

TEST_CASE("config files apply under command-line flags") {
    testsupport::TempDir dir("cli_config");
    const auto train_csv = write_series_csv(dir, "train.csv", 120, 21);
    const auto config = testsupport::write_file(dir.file("config.json"), R"({
        "omega": 8,
        "tau_train": 2,
        "seed": 7,
        "hidden_widths": [8],
        "max_epochs": 5
    })");

    RunResult r = run_cli("train --config " + q(config) + " --data " + q(train_csv) +
                          " --omega 6 --out " + q(dir.file("out")));
    INFO(r.output);
    REQUIRE(r.code == 0);
    const std::string manifest_text = testsupport::read_file(dir.file("out/manifest.json"));
    CHECK_THAT(manifest_text, ContainsSubstring("\"omega\": 6"));   // flag wins
    CHECK_THAT(manifest_text, ContainsSubstring("\"seed\": 7"));    // config wins over default
    CHECK_THAT(manifest_text, ContainsSubstring("\"max_epochs\": 5"));
    ForecastModel model = load_model(dir.file("out/model.cmam").string());
    CHECK(model.omega == 6);

    const auto bad = testsupport::write_file(dir.file("bad.json"), R"({"learning_rare": 0.1})");
    RunResult unknown = run_cli("train --config " + q(bad) + " --data " + q(train_csv));
    CHECK(unknown.code == 2);
    CHECK_THAT(unknown.output, ContainsSubstring("unknown key"));

    RunResult invalid = run_cli("train --data " + q(train_csv) + " --omega 0");
    CHECK(invalid.code == 2);
}

TEST_CASE("numeric failures exit with code 3") {
    testsupport::TempDir dir("cli_diverge");
    const auto train_csv = write_series_csv(dir, "train.csv", 120, 33);
    const auto config = testsupport::write_file(dir.file("config.json"), R"({
        "omega": 8,
        "tau_train": 2,
        "hidden_widths": [8],
        "learning_rate": 1e200,
        "max_epochs": 10
    })");
    RunResult r = run_cli("train --config " + q(config) + " --data " + q(train_csv) + " --out " +
                          q(dir.file("out")));
    INFO(r.output);
    CHECK(r.code == 3);
    CHECK_THAT(r.output, ContainsSubstring("error:"));
    CHECK_THAT(r.output, ContainsSubstring("epoch"));
}

TEST_CASE("bench writes the full grid") {
    testsupport::TempDir dir("cli_bench");
    const auto data = write_series_csv(dir, "series.csv", 540, 41);
    const auto config = testsupport::write_file(dir.file("config.json"), R"({
        "hidden_widths": [8],
        "batch_size": 32
    })");
    RunResult r = run_cli("bench --config " + q(config) + " --data " + q(data) + " --out " +
                          q(dir.file("out")));
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK_THAT(r.output, ContainsSubstring("benchmarked 20 cells"));
    const std::string bench_text = testsupport::read_file(dir.file("out/bench.csv"));
    CHECK(count_lines(bench_text) == 21); // header + 5 sizes x 2 kernels x 2 phases
    const std::string repeats_text = testsupport::read_file(dir.file("out/bench_repeats.csv"));
    CHECK(count_lines(repeats_text) == 61); // header + 20 cells x 3 repeats
    CHECK(std::filesystem::exists(dir.file("out/manifest.json")));
}
