#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmanomaly/detector.hpp"
#include "cmanomaly/error.hpp"
#include "cmanomaly/interactions.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/rng.hpp"
#include "cmanomaly/train.hpp"

namespace cmanomaly {

enum class Phase { train, predict };

inline const char* phase_name(Phase p) { return p == Phase::train ? "train" : "predict"; }

// Median wall time for one (window size, phase, kernel) cell, timer calibration already
// subtracted.
struct BenchResult {
    std::size_t window_size = 0;
    Phase phase = Phase::train;
    KernelKind kernel = KernelKind::fast;
    double wall_seconds = 0.0;
    std::size_t windows_processed = 0;
    std::size_t repeats = 0;
};

// One raw timed repeat, before calibration subtraction.
struct BenchSample {
    std::size_t window_size = 0;
    Phase phase = Phase::train;
    KernelKind kernel = KernelKind::fast;
    std::size_t repeat = 0;
    double wall_seconds = 0.0;
};

struct BenchConfig {
    std::vector<std::size_t> window_sizes{16, 32, 64, 128, 256};
    std::size_t repeats = 3;
    std::size_t batch_size = 64;
    std::size_t tau_train = 5;
    std::size_t tau_test = 1;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_widths{128, 64};
};

struct BenchSuiteResult {
    std::vector<BenchResult> rows;
    std::vector<BenchSample> samples;
    double calibration_seconds = 0.0;
};

namespace detail {

using BenchClock = std::chrono::steady_clock;

inline double elapsed_seconds(BenchClock::time_point t0, BenchClock::time_point t1) {
    return std::chrono::duration<double>(t1 - t0).count();
}

} // namespace detail

inline double median(std::vector<double> v) {
    if (v.empty()) throw InputError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Cost of the measurement itself: median gap between back-to-back clock reads.
inline double measure_timer_overhead(std::size_t trials = 101) {
    std::vector<double> gaps(trials);
    for (auto& g : gaps) {
        auto t0 = detail::BenchClock::now();
        auto t1 = detail::BenchClock::now();
        g = detail::elapsed_seconds(t0, t1);
    }
    return median(gaps);
}

inline double subtract_calibration(double seconds, double calibration) {
    return seconds > calibration ? seconds - calibration : 0.0;
}

// Times one training epoch and one full pass of test scoring for every window size and
// both kernels, on a single thread. The series is halved: first half trains, second half
// is scored. Each cell runs one discarded warm-up, then `repeats` timed runs; the
// reported number is the median minus the timer calibration.
inline BenchSuiteResult run_efficiency_suite(const Matrix& values, const BenchConfig& cfg) {
    if (cfg.repeats < 3) throw InputError("bench: need at least 3 repeats for a median");
    if (cfg.window_sizes.empty()) throw InputError("bench: no window sizes given");
    const std::size_t half = values.rows() / 2;
    if (half == 0) throw InputError("bench: series too short to halve");
    Matrix train_half(half, values.cols());
    Matrix test_half(values.rows() - half, values.cols());
    for (std::size_t r = 0; r < half; ++r)
        for (std::size_t c = 0; c < values.cols(); ++c) train_half(r, c) = values(r, c);
    for (std::size_t r = half; r < values.rows(); ++r)
        for (std::size_t c = 0; c < values.cols(); ++c) test_half(r - half, c) = values(r, c);

    BenchSuiteResult suite;
    suite.calibration_seconds = measure_timer_overhead();
    volatile double sink = 0.0;

    for (std::size_t omega : cfg.window_sizes) {
        for (KernelKind kernel : {KernelKind::fast, KernelKind::naive}) {
            TrainConfig tc;
            tc.omega = omega;
            tc.tau = cfg.tau_train;
            tc.batch_size = cfg.batch_size;
            tc.seed = cfg.seed;
            tc.hidden_widths = cfg.hidden_widths;
            tc.threads = 1;
            tc.kernel = kernel;
            Trainer trainer(train_half, tc);

            std::vector<double> train_times;
            trainer.run_epoch(); // warm-up
            for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
                auto t0 = detail::BenchClock::now();
                sink = sink + trainer.run_epoch();
                auto t1 = detail::BenchClock::now();
                const double secs = detail::elapsed_seconds(t0, t1);
                train_times.push_back(secs);
                suite.samples.push_back({omega, Phase::train, kernel, rep, secs});
            }
            suite.rows.push_back({omega, Phase::train, kernel,
                                  subtract_calibration(median(train_times), suite.calibration_seconds),
                                  trainer.window_count(), cfg.repeats});

            const ForecastModel& model = trainer.model();
            std::vector<double> predict_times;
            std::size_t predict_windows = 0;
            {
                ScoreSeries warm = score_series(model, test_half, cfg.tau_test, kernel, 1);
                predict_windows = warm.scores.size();
                sink = sink + warm.scores.back();
            }
            for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
                auto t0 = detail::BenchClock::now();
                ScoreSeries s = score_series(model, test_half, cfg.tau_test, kernel, 1);
                auto t1 = detail::BenchClock::now();
                sink = sink + s.scores.back();
                const double secs = detail::elapsed_seconds(t0, t1);
                predict_times.push_back(secs);
                suite.samples.push_back({omega, Phase::predict, kernel, rep, secs});
            }
            suite.rows.push_back({omega, Phase::predict, kernel,
                                  subtract_calibration(median(predict_times), suite.calibration_seconds),
                                  predict_windows, cfg.repeats});
        }
    }
    (void)sink;
    return suite;
}

// Per-call cost of the temporal interaction kernel alone at each window size, metric
// count held fixed. Iterations are doubled until a batch takes at least min_seconds, so
// short calls are still resolved by the clock.
inline std::vector<std::pair<std::size_t, double>> bench_kernel_scaling(
    KernelKind kernel, const std::vector<std::size_t>& omegas, std::size_t m,
    double min_seconds = 0.02, std::uint64_t seed = 0) {
    if (m == 0) throw InputError("bench: need at least one metric");
    std::vector<std::pair<std::size_t, double>> points;
    volatile double sink = 0.0;
    for (std::size_t omega : omegas) {
        Rng rng(seed);
        Matrix X(omega, m);
        for (std::size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(0.0, 1.0);
        CollabMachineParams p;
        init_collab_params(p, m, omega, rng);

        sink = sink + temporal_interactions(X, p, kernel).front(); // warm-up
        std::size_t iters = 1;
        double secs = 0.0;
        for (;;) {
            auto t0 = detail::BenchClock::now();
            for (std::size_t it = 0; it < iters; ++it)
                sink = sink + temporal_interactions(X, p, kernel).front();
            auto t1 = detail::BenchClock::now();
            secs = detail::elapsed_seconds(t0, t1);
            if (secs >= min_seconds) break;
            iters *= 2;
        }
        points.emplace_back(omega, secs / static_cast<double>(iters));
    }
    (void)sink;
    return points;
}

// Least-squares slope of log(time) against log(window size): the empirical scaling
// exponent of the kernel.
inline double fit_scaling_exponent(const std::vector<std::pair<std::size_t, double>>& points) {
    if (points.size() < 4)
        throw InputError("scaling fit: need at least 4 points, got " +
                         std::to_string(points.size()));
    std::vector<double> xs, ys;
    xs.reserve(points.size());
    ys.reserve(points.size());
    for (const auto& [n, t] : points) {
        if (n == 0 || !(t > 0.0))
            throw InputError("scaling fit: sizes and times must be positive");
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(t));
    }
    double xbar = 0.0, ybar = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xbar += xs[i];
        ybar += ys[i];
    }
    xbar /= static_cast<double>(xs.size());
    ybar /= static_cast<double>(ys.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - xbar) * (ys[i] - ybar);
        den += (xs[i] - xbar) * (xs[i] - xbar);
    }
    if (den == 0.0) throw InputError("scaling fit: all window sizes identical");
    return num / den;
}

} // namespace cmanomaly
