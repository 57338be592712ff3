#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmanomaly/dataset.hpp"
#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"

namespace cmanomaly {

// Per-metric max-min normalization parameters, fitted on training data only.
struct NormalizationParams {
    std::vector<double> mins;
    std::vector<double> maxs;

    std::size_t size() const { return mins.size(); }
};

inline NormalizationParams fit_normalizer(const Matrix& values) {
    if (values.rows() == 0 || values.cols() == 0)
        throw InputError("fit_normalizer: empty dataset");
    NormalizationParams p;
    p.mins.assign(values.cols(), 0.0);
    p.maxs.assign(values.cols(), 0.0);
    for (std::size_t c = 0; c < values.cols(); ++c) {
        double lo = values(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < values.rows(); ++r) {
            double v = values(r, c);
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
        p.mins[c] = lo;
        p.maxs[c] = hi;
    }
    return p;
}

inline NormalizationParams fit_normalizer(const MetricDataset& train) {
    return fit_normalizer(train.values);
}

// (x - min) / (max - min) per column. Constant columns (max == min) map to 0.
// Values outside the training range are not clipped; the excursion is the signal.
inline Matrix normalize_values(const NormalizationParams& p, const Matrix& values) {
    if (values.cols() != p.size())
        throw InputError("apply_normalizer: dataset has " + std::to_string(values.cols()) +
                         " metrics, normalizer has " + std::to_string(p.size()));
    Matrix out(values.rows(), values.cols());
    for (std::size_t c = 0; c < values.cols(); ++c) {
        double range = p.maxs[c] - p.mins[c];
        for (std::size_t r = 0; r < values.rows(); ++r)
            out(r, c) = range == 0.0 ? 0.0 : (values(r, c) - p.mins[c]) / range;
    }
    return out;
}

inline MetricDataset apply_normalizer(const NormalizationParams& p, const MetricDataset& d) {
    MetricDataset out = d;
    out.values = normalize_values(p, d.values);
    return out;
}

// Ordered (window, target) pairs from the slider: window s covers source rows
// [s*tau, s*tau + omega - 1], its target is source row s*tau + omega.
struct WindowSet {
    std::vector<Matrix> windows;              // each omega x m
    std::vector<std::vector<double>> targets; // each length m
    std::size_t omega = 0;
    std::size_t tau = 0;

    std::size_t size() const { return windows.size(); }
};

// Number of (window, target) pairs; 0 when no window has a target row.
inline std::size_t window_count(std::size_t T, std::size_t omega, std::size_t tau) {
    if (T < omega + 1) return 0;
    return (T - omega - 1) / tau + 1;
}

inline WindowSet make_windows(const Matrix& values, std::size_t omega, std::size_t tau) {
    if (omega < 1 || tau < 1) throw InputError("make_windows: omega and tau must be >= 1");
    const std::size_t T = values.rows();
    const std::size_t m = values.cols();
    const std::size_t n = window_count(T, omega, tau);
    if (n == 0)
        throw InputError("make_windows: need at least omega+1=" + std::to_string(omega + 1) +
                         " timestamps, got " + std::to_string(T));
    WindowSet ws;
    ws.omega = omega;
    ws.tau = tau;
    ws.windows.reserve(n);
    ws.targets.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t start = s * tau;
        Matrix w(omega, m);
        for (std::size_t r = 0; r < omega; ++r)
            for (std::size_t c = 0; c < m; ++c)
                w(r, c) = values(start + r, c);
        ws.windows.push_back(std::move(w));
        std::vector<double> t(m);
        for (std::size_t c = 0; c < m; ++c) t[c] = values(start + omega, c);
        ws.targets.push_back(std::move(t));
    }
    return ws;
}

inline WindowSet make_windows(const MetricDataset& d, std::size_t omega, std::size_t tau) {
    return make_windows(d.values, omega, tau);
}

// Copies window s (rows [s*tau, s*tau+omega-1]) into `out` without materializing the
// whole set; used by the scoring path where windows are consumed one at a time.
inline void extract_window(const Matrix& values, std::size_t s, std::size_t omega,
                           std::size_t tau, Matrix& out) {
    const std::size_t start = s * tau;
    for (std::size_t r = 0; r < omega; ++r)
        for (std::size_t c = 0; c < values.cols(); ++c)
            out(r, c) = values(start + r, c);
}

} // namespace cmanomaly
