#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmanomaly/cmanomaly.hpp"

namespace {

using cmanomaly::RunManifest;

bool has_csv_extension(const std::string& path) {
    return std::filesystem::path(path).extension() == ".csv";
}

// CSV with a header row, or a headerless whitespace/comma matrix with labels in a
// separate line file.
cmanomaly::MetricDataset load_metrics(const std::string& data_path, const std::string& labels_path,
                                      bool csv_has_labels) {
    cmanomaly::MetricDataset ds;
    if (has_csv_extension(data_path)) {
        ds = cmanomaly::load_csv(data_path, csv_has_labels);
        if (!labels_path.empty()) ds.labels = cmanomaly::load_label_lines(labels_path);
    } else {
        ds = cmanomaly::load_smd_entity(data_path, labels_path.empty()
                                                       ? std::optional<std::string>{}
                                                       : std::optional<std::string>{labels_path});
    }
    cmanomaly::validate_dataset(ds);
    return ds;
}

std::filesystem::path prepare_out_dir(const RunManifest& m) {
    std::filesystem::path out(m.out);
    std::filesystem::create_directories(out);
    cmanomaly::save_manifest((out / "manifest.json").string(), m);
    return out;
}

cmanomaly::TrainConfig train_config_from(const RunManifest& m) {
    cmanomaly::TrainConfig tc;
    tc.omega = m.omega;
    tc.tau = m.tau_train;
    tc.learning_rate = m.learning_rate;
    tc.batch_size = m.batch_size;
    tc.max_epochs = m.max_epochs;
    tc.loss_delta_stop = m.loss_delta_stop;
    tc.seed = m.seed;
    tc.hidden_widths = m.hidden_widths;
    tc.options.ablate_cm = m.ablate_cm;
    tc.options.pooled_interactions = m.pooled_interactions;
    tc.options.relu_output = m.relu_output;
    tc.options.l2_loss = m.l2_loss;
    tc.threads = m.threads;
    return tc;
}

int cmd_train(const RunManifest& m) {
    if (m.data.empty()) throw cmanomaly::InputError("train: no input data given (--data)");
    cmanomaly::MetricDataset ds = load_metrics(m.data, "", false);
    std::filesystem::path out = prepare_out_dir(m);
    cmanomaly::TrainResult result = cmanomaly::train(ds.values, train_config_from(m));
    cmanomaly::save_model(result.model, (out / "model.cmam").string());
    cmanomaly::save_loss_history_csv((out / "loss_history.csv").string(), result.loss_history);
    std::cout << "trained " << result.loss_history.size() << " epochs, final loss "
              << cmanomaly::detail::format_double(result.loss_history.back()) << "\n";
    std::cout << "model: " << (out / "model.cmam").string() << "\n";
    return 0;
}

int cmd_detect(const RunManifest& m) {
    if (m.data.empty()) throw cmanomaly::InputError("detect: no input data given (--data)");
    if (m.model.empty()) throw cmanomaly::InputError("detect: no model given (--model)");
    cmanomaly::ForecastModel model = cmanomaly::load_model(m.model);
    cmanomaly::MetricDataset ds = load_metrics(m.data, "", false);
    std::filesystem::path out = prepare_out_dir(m);
    cmanomaly::ScoreSeries series =
        cmanomaly::score_series(model, ds.values, m.tau_test, cmanomaly::KernelKind::fast, m.threads);
    cmanomaly::save_scores_csv((out / "scores.csv").string(), series);
    std::cout << "scored " << series.scores.size() << " windows from timestamp " << series.offset
              << "\n";
    std::cout << "scores: " << (out / "scores.csv").string() << "\n";
    return 0;
}

int cmd_evaluate(const RunManifest& m) {
    if (m.scores.empty())
        throw cmanomaly::InputError("evaluate: no scores file given (positional argument)");
    cmanomaly::ScoreSeries series = cmanomaly::load_scores_csv(m.scores);
    std::vector<std::uint8_t> labels;
    if (!m.labels.empty()) {
        labels = cmanomaly::load_label_lines(m.labels);
    } else if (!m.data.empty()) {
        cmanomaly::MetricDataset ds = load_metrics(m.data, "", true);
        if (!ds.has_labels())
            throw cmanomaly::InputError("evaluate: " + m.data + " carries no labels");
        labels = ds.labels;
    } else {
        throw cmanomaly::InputError("evaluate: need labels (--labels file or labeled --data)");
    }
    std::vector<std::uint8_t> aligned = cmanomaly::align_labels(labels, series);
    std::filesystem::path out = prepare_out_dir(m);
    cmanomaly::SweepResult sweep =
        cmanomaly::sweep_threshold(series.scores, aligned, m.threshold_step, m.adjust);
    for (std::size_t k = 0; k < sweep.reports.size(); ++k)
        cmanomaly::save_eval_report((out / ("report_" + std::to_string(k) + ".txt")).string(),
                                    sweep.reports[k]);
    const cmanomaly::EvalReport& best = sweep.reports[sweep.best_index];
    cmanomaly::save_eval_report((out / "best_report.txt").string(), best);
    cmanomaly::save_sweep_csv((out / "sweep.csv").string(), sweep);
    std::cout << "best threshold=" << cmanomaly::detail::format_double(best.threshold)
              << " precision=" << cmanomaly::detail::format_double(best.precision)
              << " recall=" << cmanomaly::detail::format_double(best.recall)
              << " f1=" << cmanomaly::detail::format_double(best.f1) << "\n";
    return 0;
}

int cmd_bench(const RunManifest& m) {
    if (m.data.empty()) throw cmanomaly::InputError("bench: no input data given (--data)");
    cmanomaly::MetricDataset ds = load_metrics(m.data, "", false);
    std::filesystem::path out = prepare_out_dir(m);
    cmanomaly::BenchConfig bc;
    bc.batch_size = m.batch_size;
    bc.tau_train = m.tau_train;
    bc.tau_test = m.tau_test;
    bc.seed = m.seed;
    bc.hidden_widths = m.hidden_widths;
    cmanomaly::BenchSuiteResult suite = cmanomaly::run_efficiency_suite(ds.values, bc);
    cmanomaly::save_bench_csv((out / "bench.csv").string(), suite.rows);
    cmanomaly::save_bench_repeats_csv((out / "bench_repeats.csv").string(), suite.samples,
                                      suite.calibration_seconds);
    std::cout << "benchmarked " << suite.rows.size() << " cells, timer calibration "
              << cmanomaly::detail::format_double(suite.calibration_seconds) << "s\n";
    std::cout << "results: " << (out / "bench.csv").string() << "\n";
    return 0;
}

struct OptBinding {
    CLI::Option* opt;
    std::function<void(RunManifest&)> apply;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecasting-based anomaly detection for multivariate monitoring series"};
    app.require_subcommand(1);

    RunManifest cli; // holds values the user actually passed; copied over config values
    std::vector<OptBinding> bindings;
    std::string config_path;

    auto bind = [&bindings](CLI::Option* opt, std::function<void(RunManifest&)> apply) {
        bindings.push_back({opt, std::move(apply)});
    };

    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file; flags override its values");
    };
    auto add_data = [&](CLI::App* sub, const char* help) {
        bind(sub->add_option("--data", cli.data, help),
             [&cli](RunManifest& m) { m.data = cli.data; });
    };
    auto add_out = [&](CLI::App* sub) {
        bind(sub->add_option("--out", cli.out, "Output directory (default: out)"),
             [&cli](RunManifest& m) { m.out = cli.out; });
    };
    auto add_seed = [&](CLI::App* sub) {
        bind(sub->add_option("--seed", cli.seed, "RNG seed (default: 0)"),
             [&cli](RunManifest& m) { m.seed = cli.seed; });
    };
    auto add_threads = [&](CLI::App* sub) {
        bind(sub->add_option("--threads", cli.threads, "Worker threads (default: 1)"),
             [&cli](RunManifest& m) { m.threads = cli.threads; });
    };
    auto add_tau_train = [&](CLI::App* sub) {
        bind(sub->add_option("--tau-train", cli.tau_train, "Training window stride (default: 5)"),
             [&cli](RunManifest& m) { m.tau_train = cli.tau_train; });
    };
    auto add_tau_test = [&](CLI::App* sub) {
        bind(sub->add_option("--tau-test", cli.tau_test, "Scoring window stride (default: 1)"),
             [&cli](RunManifest& m) { m.tau_test = cli.tau_test; });
    };

    CLI::App* train = app.add_subcommand("train", "Fit a forecasting model on a metrics series");
    add_config(train);
    add_data(train, "Training series (.csv with header, otherwise headerless matrix)");
    add_out(train);
    add_seed(train);
    add_threads(train);
    add_tau_train(train);
    bind(train->add_option("--omega", cli.omega, "Window size (default: 32)"),
         [&cli](RunManifest& m) { m.omega = cli.omega; });
    bind(train->add_flag("--ablate-cm", cli.ablate_cm,
                         "Replace the interaction layer with per-metric time averages"),
         [&cli](RunManifest& m) { m.ablate_cm = cli.ablate_cm; });
    bind(train->add_flag("--pooled-interactions", cli.pooled_interactions,
                         "Pool interaction outputs to two scalars"),
         [&cli](RunManifest& m) { m.pooled_interactions = cli.pooled_interactions; });
    bind(train->add_flag("--relu-output", cli.relu_output, "Apply ReLU to the final layer"),
         [&cli](RunManifest& m) { m.relu_output = cli.relu_output; });
    bind(train->add_flag("--l2-loss", cli.l2_loss,
                         "Train on unsquared Euclidean distance instead of mean squared error"),
         [&cli](RunManifest& m) { m.l2_loss = cli.l2_loss; });

    CLI::App* detect = app.add_subcommand("detect", "Score a series with a trained model");
    add_config(detect);
    add_data(detect, "Series to score");
    add_out(detect);
    add_threads(detect);
    add_tau_test(detect);
    bind(detect->add_option("--model", cli.model, "Trained model file"),
         [&cli](RunManifest& m) { m.model = cli.model; });

    CLI::App* evaluate = app.add_subcommand("evaluate", "Sweep thresholds over saved scores");
    add_config(evaluate);
    bind(evaluate->add_option("scores", cli.scores, "Scores CSV written by detect"),
         [&cli](RunManifest& m) { m.scores = cli.scores; });
    bind(evaluate->add_option("--labels", cli.labels, "Label file, one 0/1 per timestamp"),
         [&cli](RunManifest& m) { m.labels = cli.labels; });
    add_data(evaluate, "Labeled .csv as label source when --labels is absent");
    add_out(evaluate);
    bind(evaluate->add_option("--threshold-step", cli.threshold_step,
                              "Threshold grid spacing in (0, 1] (default: 0.1)"),
         [&cli](RunManifest& m) { m.threshold_step = cli.threshold_step; });
    bool no_adjust = false;
    bind(evaluate->add_flag("--no-adjust", no_adjust,
                            "Score points as-is instead of adjusting within labeled runs"),
         [&no_adjust](RunManifest& m) { m.adjust = !no_adjust; });

    CLI::App* bench = app.add_subcommand("bench", "Time training and scoring for both kernels");
    add_config(bench);
    add_data(bench, "Series to benchmark on (halved into train and score parts)");
    add_out(bench);
    add_seed(bench);
    add_tau_train(bench);
    add_tau_test(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the message
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        RunManifest m;
        m.command = sub->get_name();
        if (!config_path.empty()) {
            m.config = config_path;
            cmanomaly::apply_config_file(m, config_path);
        }
        for (const OptBinding& b : bindings)
            if (b.opt->count() > 0) b.apply(m);
        cmanomaly::validate_manifest(m);

        if (sub == train) return cmd_train(m);
        if (sub == detect) return cmd_detect(m);
        if (sub == evaluate) return cmd_evaluate(m);
        return cmd_bench(m);
    } catch (const cmanomaly::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cmanomaly::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
