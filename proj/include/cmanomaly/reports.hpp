#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cmanomaly/bench.hpp"
#include "cmanomaly/dataset.hpp"
#include "cmanomaly/detector.hpp"
#include "cmanomaly/error.hpp"

namespace cmanomaly {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path);
    return out;
}

inline std::uint64_t parse_index(std::string_view s, const std::string& path, std::size_t line) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError(path + ": bad timestamp index '" + std::string(s) + "' on line " +
                         std::to_string(line));
    return v;
}

} // namespace detail

inline constexpr const char* kScoresHeader = "timestamp_index,score";

inline void save_scores_csv(const std::string& path, const ScoreSeries& series) {
    std::ofstream out = detail::open_out(path);
    out << kScoresHeader << "\n";
    for (std::size_t s = 0; s < series.scores.size(); ++s)
        out << (series.offset + s * series.stride) << "," << detail::format_double(series.scores[s])
            << "\n";
    if (!out) throw InputError("failed writing " + path);
}

inline ScoreSeries load_scores_csv(const std::string& path) {
    std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty() || detail::trim(lines[0]) != kScoresHeader)
        throw InputError(path + ": expected header '" + std::string(kScoresHeader) + "'");
    ScoreSeries series;
    std::vector<std::uint64_t> indices;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto fields = detail::split_fields(lines[i]);
        if (fields.size() != 2)
            throw InputError(path + ": expected 2 columns on line " + std::to_string(i + 1) +
                             ", got " + std::to_string(fields.size()));
        indices.push_back(detail::parse_index(fields[0], path, i + 1));
        auto score = detail::parse_double(fields[1]);
        if (!score)
            throw InputError(path + ": bad score '" + std::string(fields[1]) + "' on line " +
                             std::to_string(i + 1));
        series.scores.push_back(*score);
    }
    if (series.scores.empty()) throw InputError(path + ": no score rows");
    series.offset = indices[0];
    series.stride = indices.size() > 1 ? indices[1] - indices[0] : 1;
    if (indices.size() > 1 && indices[1] <= indices[0])
        throw InputError(path + ": timestamp indices must increase");
    for (std::size_t s = 0; s < indices.size(); ++s)
        if (indices[s] != series.offset + s * series.stride)
            throw InputError(path + ": timestamp indices are not evenly spaced at line " +
                             std::to_string(s + 2));
    return series;
}

inline void save_eval_report(const std::string& path, const EvalReport& r) {
    std::ofstream out = detail::open_out(path);
    out << "threshold=" << detail::format_double(r.threshold) << "\n"
        << "adjusted=" << (r.adjusted ? 1 : 0) << "\n"
        << "tp=" << r.tp << "\n"
        << "fp=" << r.fp << "\n"
        << "fn=" << r.fn << "\n"
        << "tn=" << r.tn << "\n"
        << "precision=" << detail::format_double(r.precision) << "\n"
        << "recall=" << detail::format_double(r.recall) << "\n"
        << "f1=" << detail::format_double(r.f1) << "\n";
    if (!out) throw InputError("failed writing " + path);
}

inline void save_sweep_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream out = detail::open_out(path);
    out << "threshold,tp,fp,fn,tn,precision,recall,f1\n";
    for (const EvalReport& r : sweep.reports)
        out << detail::format_double(r.threshold) << "," << r.tp << "," << r.fp << "," << r.fn
            << "," << r.tn << "," << detail::format_double(r.precision) << ","
            << detail::format_double(r.recall) << "," << detail::format_double(r.f1) << "\n";
    if (!out) throw InputError("failed writing " + path);
}

inline void save_loss_history_csv(const std::string& path, const std::vector<double>& history) {
    std::ofstream out = detail::open_out(path);
    out << "epoch,loss\n";
    for (std::size_t e = 0; e < history.size(); ++e)
        out << (e + 1) << "," << detail::format_double(history[e]) << "\n";
    if (!out) throw InputError("failed writing " + path);
}

inline void save_bench_csv(const std::string& path, const std::vector<BenchResult>& rows) {
    std::ofstream out = detail::open_out(path);
    out << "window_size,phase,kernel,wall_seconds,windows_processed,repeats\n";
    for (const BenchResult& r : rows)
        out << r.window_size << "," << phase_name(r.phase) << "," << kernel_name(r.kernel) << ","
            << detail::format_double(r.wall_seconds) << "," << r.windows_processed << ","
            << r.repeats << "\n";
    if (!out) throw InputError("failed writing " + path);
}

inline void save_bench_repeats_csv(const std::string& path, const std::vector<BenchSample>& samples,
                                   double calibration_seconds) {
    std::ofstream out = detail::open_out(path);
    out << "window_size,phase,kernel,repeat,wall_seconds,calibration_seconds\n";
    for (const BenchSample& s : samples)
        out << s.window_size << "," << phase_name(s.phase) << "," << kernel_name(s.kernel) << ","
            << s.repeat << "," << detail::format_double(s.wall_seconds) << ","
            << detail::format_double(calibration_seconds) << "\n";
    if (!out) throw InputError("failed writing " + path);
}

} // namespace cmanomaly
