#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/model.hpp"
#include "cmanomaly/preprocess.hpp"

namespace cmanomaly {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scores for a test series: one per window, scores[s] belongs to time index
// offset + s * stride of the original series.
struct ScoreSeries {
    std::vector<double> scores;
    std::size_t offset = 0;
    std::size_t stride = 1;
};

// Forecast error squashed through the sigmoid. Loss is nonnegative, so every score lands
// in [0.5, 1); large losses that would round the sigmoid up to exactly 1.0 are clamped to
// the largest double below it so thresholding at 1.0 stays meaningful.
inline ScoreSeries score_series(const ForecastModel& model, const Matrix& values,
                                std::size_t tau = 1, KernelKind kernel = KernelKind::fast,
                                std::size_t threads = 1) {
    if (values.cols() != model.m)
        throw InputError("score: series has " + std::to_string(values.cols()) +
                         " metrics, model expects " + std::to_string(model.m));
    if (threads == 0) throw InputError("score: thread count must be positive");
    Matrix scaled =
        model.normalizer.mins.empty() ? values : normalize_values(model.normalizer, values);
    const std::size_t N = window_count(scaled.rows(), model.omega, tau);
    if (N == 0)
        throw InputError("score: series has " + std::to_string(scaled.rows()) +
                         " rows, need at least " + std::to_string(model.omega + 1) +
                         " for window size " + std::to_string(model.omega));

    ScoreSeries out;
    out.offset = model.omega;
    out.stride = tau;
    out.scores.assign(N, 0.0);
    const double below_one = std::nextafter(1.0, 0.0);

    auto run_range = [&](std::size_t lo, std::size_t hi) {
        Matrix window(model.omega, model.m);
        for (std::size_t s = lo; s < hi; ++s) {
            extract_window(scaled, s, model.omega, tau, window);
            std::vector<double> pred = model_forward(model, window, nullptr, kernel);
            const double* target = scaled.row(s * tau + model.omega);
            double loss = window_loss(model, pred, std::span<const double>(target, model.m));
            if (!std::isfinite(loss))
                throw NumericError("score: non-finite forecast error at window " + std::to_string(s));
            double score = sigmoid(loss);
            out.scores[s] = score < 1.0 ? score : below_one;
        }
    };

    if (threads <= 1 || N <= 1) {
        run_range(0, N);
    } else {
        const std::size_t workers = std::min(threads, N);
        const std::size_t per = (N + workers - 1) / workers;
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                try {
                    run_range(std::min(N, t * per), std::min(N, (t + 1) * per));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

// Labels for the scored positions: labels[offset + s * stride] per score s.
inline std::vector<std::uint8_t> align_labels(const std::vector<std::uint8_t>& labels,
                                              const ScoreSeries& series) {
    std::vector<std::uint8_t> out(series.scores.size());
    for (std::size_t s = 0; s < out.size(); ++s) {
        const std::size_t idx = series.offset + s * series.stride;
        if (idx >= labels.size())
            throw InputError("labels cover " + std::to_string(labels.size()) +
                             " timestamps, scores reach index " + std::to_string(idx));
        out[s] = labels[idx];
    }
    return out;
}

inline std::vector<std::uint8_t> apply_threshold(const std::vector<double>& scores, double theta) {
    std::vector<std::uint8_t> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= theta ? 1 : 0;
    return pred;
}

// Within each maximal run of consecutive 1-labels, a single predicted hit marks the whole
// run as detected. Predictions outside labeled runs are left alone.
inline std::vector<std::uint8_t> point_adjust(const std::vector<std::uint8_t>& pred,
                                              const std::vector<std::uint8_t>& labels) {
    if (pred.size() != labels.size())
        throw InputError("point_adjust: " + std::to_string(pred.size()) + " predictions but " +
                         std::to_string(labels.size()) + " labels");
    std::vector<std::uint8_t> out = pred;
    const std::size_t n = labels.size();
    std::size_t i = 0;
    while (i < n) {
        if (!labels[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && labels[j]) ++j;
        bool hit = false;
        for (std::size_t k = i; k < j && !hit; ++k) hit = out[k] != 0;
        if (hit)
            for (std::size_t k = i; k < j; ++k) out[k] = 1;
        i = j;
    }
    return out;
}

struct EvalReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    double threshold = 0.0;
    bool adjusted = false;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Pointwise confusion counts; ratios with an empty denominator are reported as 0.
inline EvalReport evaluate(const std::vector<std::uint8_t>& pred,
                           const std::vector<std::uint8_t>& labels, double threshold = 0.0,
                           bool adjusted = false) {
    if (pred.size() != labels.size())
        throw InputError("evaluate: " + std::to_string(pred.size()) + " predictions but " +
                         std::to_string(labels.size()) + " labels");
    EvalReport r;
    r.threshold = threshold;
    r.adjusted = adjusted;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] && labels[i])
            ++r.tp;
        else if (pred[i] && !labels[i])
            ++r.fp;
        else if (!pred[i] && labels[i])
            ++r.fn;
        else
            ++r.tn;
    }
    r.precision = (r.tp + r.fp) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.recall = (r.tp + r.fn) ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.f1 = (r.precision + r.recall > 0.0)
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

struct SweepResult {
    std::vector<EvalReport> reports; // one per grid threshold, ascending
    std::size_t best_index = 0;
};

// Grid k * step for k = 0, 1, ... while the threshold stays within [0, 1]. Best report is
// the highest F1, ties going to the smallest threshold.
inline SweepResult sweep_threshold(const std::vector<double>& scores,
                                   const std::vector<std::uint8_t>& labels, double step = 0.1,
                                   bool adjust = true) {
    if (!(step > 0.0)) throw InputError("sweep: threshold step must be positive");
    if (scores.size() != labels.size())
        throw InputError("sweep: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
    SweepResult result;
    for (std::size_t k = 0;; ++k) {
        const double theta = static_cast<double>(k) * step;
        if (theta > 1.0 + step * 1e-9) break;
        std::vector<std::uint8_t> pred = apply_threshold(scores, theta);
        if (adjust) pred = point_adjust(pred, labels);
        result.reports.push_back(evaluate(pred, labels, theta, adjust));
    }
    for (std::size_t i = 1; i < result.reports.size(); ++i)
        if (result.reports[i].f1 > result.reports[result.best_index].f1) result.best_index = i;
    return result;
}

} // namespace cmanomaly
