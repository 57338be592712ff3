#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "cmanomaly/detector.hpp"
#include "cmanomaly/train.hpp"
#include "support/synthetic.hpp"

using namespace cmanomaly;

namespace {

// Forecasts the per-metric window mean exactly: interactions ablated, single identity
// layer. Constant data therefore scores sigmoid(0) = 0.5 exactly.
ForecastModel identity_model(std::size_t omega, std::size_t m) {
    ForecastModel model;
    model.omega = omega;
    model.m = m;
    model.options.ablate_cm = true;
    model.mlp.widths = {m, m};
    MlpLayer layer;
    layer.W = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) layer.W(i, i) = 1.0;
    layer.b.assign(m, 0.0);
    model.mlp.layers.push_back(layer);
    return model;
}

// Quadratic but obviously-correct restatement of the adjustment rule: a labeled point
// becomes 1 iff any prediction inside its maximal labeled run is 1.
std::vector<std::uint8_t> adjust_oracle(const std::vector<std::uint8_t>& pred,
                                        const std::vector<std::uint8_t>& labels) {
    const std::size_t n = labels.size();
    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!labels[i]) {
            out[i] = pred[i];
            continue;
        }
        std::size_t lo = i;
        while (lo > 0 && labels[lo - 1]) --lo;
        std::size_t hi = i;
        while (hi + 1 < n && labels[hi + 1]) ++hi;
        std::uint8_t any = 0;
        for (std::size_t k = lo; k <= hi; ++k) any |= pred[k];
        out[i] = any;
    }
    return out;
}

} // namespace

TEST_CASE("sigmoid hits its anchor points") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK_THAT(sigmoid(1.0) + sigmoid(-1.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK(sigmoid(50.0) > 0.999999);
    CHECK(sigmoid(-50.0) < 1e-6);
}

TEST_CASE("a perfect forecast scores exactly one half") {
    Matrix values(20, 3, 0.7);
    ScoreSeries s = score_series(identity_model(4, 3), values);
    REQUIRE(s.scores.size() == window_count(20, 4, 1));
    CHECK(s.offset == 4);
    CHECK(s.stride == 1);
    for (double v : s.scores) CHECK(v == 0.5);
}

TEST_CASE("saturated scores are clamped just below one") {
    const std::size_t omega = 4;
    Matrix values(omega + 1, 1, 0.0);
    values(omega, 0) = 1e6; // squared error 1e12 saturates the sigmoid
    ScoreSeries s = score_series(identity_model(omega, 1), values);
    REQUIRE(s.scores.size() == 1);
    CHECK(s.scores[0] < 1.0);
    CHECK(s.scores[0] == std::nextafter(1.0, 0.0));
}

TEST_CASE("a non-finite forecast error is reported, not scored") {
    const std::size_t omega = 3;
    Matrix values(omega + 1, 1, 0.0);
    values(omega, 0) = 1e200; // squared error overflows
    CHECK_THROWS_MATCHES(
        score_series(identity_model(omega, 1), values), NumericError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("non-finite")));
}

TEST_CASE("the model's stored normalization is applied to raw input") {
    Matrix raw = testsupport::make_clean_series(60, 3, 7, 0.01);
    ForecastModel model = identity_model(5, 3);
    model.normalizer = fit_normalizer(raw);
    ScoreSeries with_params = score_series(model, raw);

    ForecastModel bare = identity_model(5, 3);
    ScoreSeries pre_scaled = score_series(bare, normalize_values(model.normalizer, raw));
    CHECK(with_params.scores == pre_scaled.scores);
}

TEST_CASE("scoring respects the test stride") {
    Matrix values = testsupport::make_clean_series(50, 2, 3, 0.01);
    ScoreSeries s = score_series(identity_model(6, 2), values, 4);
    CHECK(s.offset == 6);
    CHECK(s.stride == 4);
    CHECK(s.scores.size() == window_count(50, 6, 4));
}

TEST_CASE("scoring is bitwise identical across thread counts") {
    Matrix values = testsupport::make_clean_series(150, 4, 19, 0.01);
    TrainConfig cfg;
    cfg.omega = 8;
    cfg.tau = 2;
    cfg.max_epochs = 2;
    cfg.hidden_widths = {8};
    ForecastModel model = train(values, cfg).model;
    ScoreSeries one = score_series(model, values, 1, KernelKind::fast, 1);
    for (std::size_t threads : {2, 4, 9}) {
        ScoreSeries many = score_series(model, values, 1, KernelKind::fast, threads);
        INFO("threads=" << threads);
        CHECK(one.scores == many.scores);
        CHECK(one.offset == many.offset);
    }
}

TEST_CASE("scoring rejects malformed input") {
    ForecastModel model = identity_model(8, 2);
    CHECK_THROWS_AS(score_series(model, Matrix(8, 2, 0.0)), InputError);  // too short
    CHECK_THROWS_AS(score_series(model, Matrix(20, 3, 0.0)), InputError); // wrong width
    CHECK_THROWS_AS(score_series(model, Matrix(20, 2, 0.0), 1, KernelKind::fast, 0), InputError);
}

TEST_CASE("label alignment follows offset and stride") {
    ScoreSeries s;
    s.scores = {0.5, 0.6, 0.7};
    s.offset = 4;
    s.stride = 3;
    std::vector<std::uint8_t> labels(11, 0);
    labels[4] = 1;
    labels[10] = 1;
    CHECK(align_labels(labels, s) == std::vector<std::uint8_t>{1, 0, 1});

    labels.resize(10); // scores reach index 10
    CHECK_THROWS_AS(align_labels(labels, s), InputError);
}

TEST_CASE("thresholding is a half-open comparison") {
    std::vector<double> scores = {0.2, 0.5, 0.8, std::nextafter(1.0, 0.0)};
    CHECK(apply_threshold(scores, 0.0) == std::vector<std::uint8_t>{1, 1, 1, 1});
    CHECK(apply_threshold(scores, 0.5) == std::vector<std::uint8_t>{0, 1, 1, 1});
    CHECK(apply_threshold(scores, 1.0) == std::vector<std::uint8_t>{0, 0, 0, 0});
}

TEST_CASE("point adjustment fills labeled runs that were hit") {
    using V = std::vector<std::uint8_t>;
    // One hit anywhere in the run marks the whole run.
    CHECK(point_adjust(V{0, 0, 1, 0, 0}, V{0, 1, 1, 1, 0}) == V{0, 1, 1, 1, 0});
    // A missed run stays missed.
    CHECK(point_adjust(V{0, 0, 0, 0, 1}, V{0, 1, 1, 0, 0}) == V{0, 0, 0, 0, 1});
    // False positives outside runs are never touched.
    CHECK(point_adjust(V{1, 0, 0, 0, 1}, V{0, 1, 1, 1, 0}) == V{1, 0, 0, 0, 1});
    // Runs are independent.
    CHECK(point_adjust(V{1, 0, 0, 0, 0, 0}, V{1, 1, 0, 1, 1, 1}) == V{1, 1, 0, 0, 0, 0});
    // Run touching the end of the series.
    CHECK(point_adjust(V{0, 0, 1}, V{0, 1, 1}) == V{0, 1, 1});
    CHECK_THROWS_AS(point_adjust(V{1, 0}, V{1}), InputError);
}

TEST_CASE("point adjustment agrees with a brute-force oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.bounded(50);
        std::vector<std::uint8_t> pred(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.next_unit() < 0.3 ? 1 : 0;
            labels[i] = rng.next_unit() < 0.4 ? 1 : 0;
        }
        auto adjusted = point_adjust(pred, labels);
        CAPTURE(trial, n);
        REQUIRE(adjusted == adjust_oracle(pred, labels));
        // Idempotent, monotone in recall, and inert off the labeled runs.
        REQUIRE(point_adjust(adjusted, labels) == adjusted);
        auto raw = evaluate(pred, labels);
        auto adj = evaluate(adjusted, labels);
        REQUIRE(adj.recall >= raw.recall);
        for (std::size_t i = 0; i < n; ++i)
            if (!labels[i]) REQUIRE(adjusted[i] == pred[i]);
    }
}

TEST_CASE("evaluation counts and ratios match hand-worked values") {
    using V = std::vector<std::uint8_t>;
    EvalReport r = evaluate(V{1, 1, 0, 0, 1, 0}, V{1, 0, 1, 0, 1, 0}, 0.3, true);
    CHECK(r.tp == 2);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.tn == 2);
    CHECK(r.threshold == 0.3);
    CHECK(r.adjusted);
    CHECK_THAT(r.precision, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(r.recall, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(r.f1, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));

    EvalReport none = evaluate(V{0, 0}, V{1, 1});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);

    EvalReport clean = evaluate(V{0, 0}, V{0, 0});
    CHECK(clean.tn == 2);
    CHECK(clean.f1 == 0.0);

    CHECK_THROWS_AS(evaluate(V{1}, V{1, 0}), InputError);
}

TEST_CASE("the threshold sweep walks the whole grid") {
    std::vector<double> scores = {0.05, 0.55, 0.95};
    std::vector<std::uint8_t> labels = {0, 0, 1};
    SweepResult sweep = sweep_threshold(scores, labels, 0.1, false);
    REQUIRE(sweep.reports.size() == 11);
    for (std::size_t k = 0; k < 11; ++k) {
        CHECK(sweep.reports[k].threshold == static_cast<double>(k) * 0.1);
        CHECK_FALSE(sweep.reports[k].adjusted);
        // Recompute F1 from the counts the report itself carries.
        const auto& r = sweep.reports[k];
        double p = r.tp + r.fp ? double(r.tp) / double(r.tp + r.fp) : 0.0;
        double rec = r.tp + r.fn ? double(r.tp) / double(r.tp + r.fn) : 0.0;
        double f1 = p + rec > 0 ? 2 * p * rec / (p + rec) : 0.0;
        CHECK_THAT(r.f1, Catch::Matchers::WithinAbs(f1, 1e-15));
    }
    CHECK(sweep.reports.back().threshold == 1.0);
    // Predicted positives never increase as the threshold rises.
    for (std::size_t k = 1; k < 11; ++k)
        CHECK(sweep.reports[k].tp + sweep.reports[k].fp <=
              sweep.reports[k - 1].tp + sweep.reports[k - 1].fp);

    SweepResult coarse = sweep_threshold(scores, labels, 0.5, false);
    REQUIRE(coarse.reports.size() == 3); // 0, 0.5, 1.0
    SweepResult giant = sweep_threshold(scores, labels, 0.6, false);
    REQUIRE(giant.reports.size() == 2); // 0, 0.6
}

TEST_CASE("the sweep picks the best threshold, ties to the smallest") {
    std::vector<double> separated = {0.55, 0.65, 0.55, 0.65, 0.55};
    std::vector<std::uint8_t> labels = {0, 1, 0, 1, 0};
    SweepResult sweep = sweep_threshold(separated, labels, 0.1, false);
    CHECK(sweep.best_index == 6); // theta = 0.6 isolates the anomalies exactly
    CHECK(sweep.reports[6].f1 == 1.0);

    std::vector<double> flat(4, 0.65);
    std::vector<std::uint8_t> all_one(4, 1);
    SweepResult tie = sweep_threshold(flat, all_one, 0.1, false);
    // Thresholds 0 through 0.6 all classify perfectly; the smallest wins.
    CHECK(tie.best_index == 0);
    CHECK(tie.reports[0].f1 == 1.0);
}

TEST_CASE("the sweep adjusts before counting when asked") {
    // Scores hit only the middle of the labeled run; adjustment credits the whole run.
    std::vector<double> scores = {0.2, 0.2, 0.9, 0.2, 0.2};
    std::vector<std::uint8_t> labels = {0, 1, 1, 1, 0};
    SweepResult adjusted = sweep_threshold(scores, labels, 0.5, true);
    SweepResult raw = sweep_threshold(scores, labels, 0.5, false);
    // theta = 0.5: raw catches 1 of 3 labeled points, adjusted catches all 3.
    CHECK(raw.reports[1].tp == 1);
    CHECK(adjusted.reports[1].tp == 3);
    CHECK(adjusted.reports[1].adjusted);
    CHECK(adjusted.reports[1].recall >= raw.reports[1].recall);
}

TEST_CASE("the sweep validates its input") {
    std::vector<double> scores = {0.5};
    std::vector<std::uint8_t> labels = {1};
    CHECK_THROWS_AS(sweep_threshold(scores, labels, 0.0), InputError);
    CHECK_THROWS_AS(sweep_threshold(scores, labels, -0.1), InputError);
    CHECK_THROWS_AS(sweep_threshold(scores, std::vector<std::uint8_t>{1, 0}, 0.1), InputError);
}
