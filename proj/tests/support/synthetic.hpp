#pragma once

// Synthetic multivariate series for end-to-end tests: coupled sinusoids with mild noise,
// plus alternating-sign spike segments injected into the test half as ground-truth
// anomalies.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "cmanomaly/dataset.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/rng.hpp"

namespace testsupport {

struct SyntheticSpec {
    std::size_t train_T = 2500;
    std::size_t test_T = 2500;
    std::size_t m = 5;
    double noise = 0.01;
    std::size_t n_segments = 10;
    std::size_t min_len = 30;
    std::size_t max_len = 40;
    std::size_t min_gap = 150; // clean rows between segments and before the first one
    double amplitude = 3.0;    // spike height relative to the clean signal range
    std::size_t affected_min = 3;
};

// Two base oscillations (periods 24 and 57) mixed into m channels so that pairwise
// structure, not any single metric, carries the predictable signal.
inline cmanomaly::Matrix make_clean_series(std::size_t T, std::size_t m, std::uint64_t seed,
                                           double noise) {
    cmanomaly::Rng rng(seed);
    const double tau = 6.283185307179586;
    const double p1 = rng.uniform(0.0, tau);
    const double p2 = rng.uniform(0.0, tau);
    cmanomaly::Matrix v(T, m);
    for (std::size_t t = 0; t < T; ++t) {
        const double s1 = std::sin(tau * static_cast<double>(t) / 24.0 + p1);
        const double s2 = std::sin(tau * static_cast<double>(t) / 57.0 + p2);
        const double base[5] = {s1, s2, 0.6 * s1 + 0.4 * s2, s1 * s2, 0.5 * (s1 - s2)};
        for (std::size_t k = 0; k < m; ++k)
            v(t, k) = base[k % 5] + noise * rng.normal();
    }
    return v;
}

// Spikes alternate sign every timestep so that sums over a window largely cancel: a
// recovered system's history no longer drags the forecast once the segment ends.
inline void inject_spike_segments(cmanomaly::Matrix& values, std::vector<std::uint8_t>& labels,
                                  const SyntheticSpec& spec, std::uint64_t seed) {
    cmanomaly::Rng rng(seed);
    const std::size_t T = values.rows();
    const std::size_t m = values.cols();
    labels.assign(T, 0);
    const std::size_t stride = (T - spec.min_gap) / spec.n_segments;
    if (stride < spec.max_len + spec.min_gap)
        throw cmanomaly::InputError("synthetic: test half too short for the segment layout");
    std::vector<std::size_t> metric_ids(m);
    std::iota(metric_ids.begin(), metric_ids.end(), std::size_t{0});
    for (std::size_t seg = 0; seg < spec.n_segments; ++seg) {
        const std::size_t slack = stride - spec.max_len - spec.min_gap;
        const std::size_t start =
            spec.min_gap + seg * stride + (slack ? rng.bounded(slack + 1) : 0);
        const std::size_t len = spec.min_len + rng.bounded(spec.max_len - spec.min_len + 1);
        rng.shuffle(metric_ids);
        const std::size_t affected =
            spec.affected_min + rng.bounded(m - spec.affected_min + 1);
        for (std::size_t t = start; t < start + len && t < T; ++t) {
            labels[t] = 1;
            const double flip = (t - start) % 2 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < affected; ++j)
                values(t, metric_ids[j]) += spec.amplitude * flip;
        }
    }
}

// Clean training half and anomaly-seeded test half cut from one continuous series.
inline cmanomaly::DatasetSplit make_split(const SyntheticSpec& spec, std::uint64_t seed) {
    cmanomaly::Matrix full =
        make_clean_series(spec.train_T + spec.test_T, spec.m, seed, spec.noise);
    cmanomaly::DatasetSplit split;
    split.train.name = "synthetic_train";
    split.test.name = "synthetic_test";
    for (std::size_t k = 0; k < spec.m; ++k) {
        split.train.metric_names.push_back("m" + std::to_string(k));
        split.test.metric_names.push_back("m" + std::to_string(k));
    }
    split.train.values = cmanomaly::Matrix(spec.train_T, spec.m);
    split.test.values = cmanomaly::Matrix(spec.test_T, spec.m);
    for (std::size_t t = 0; t < spec.train_T; ++t)
        for (std::size_t k = 0; k < spec.m; ++k) split.train.values(t, k) = full(t, k);
    for (std::size_t t = 0; t < spec.test_T; ++t)
        for (std::size_t k = 0; k < spec.m; ++k)
            split.test.values(t, k) = full(spec.train_T + t, k);
    inject_spike_segments(split.test.values, split.test.labels, spec, seed + 0x9e3779b9);
    return split;
}

} // namespace testsupport
