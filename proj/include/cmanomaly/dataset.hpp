#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/matrix.hpp"

namespace cmanomaly {

// One entity's observations: T timestamps (rows) by m metrics (columns).
// Timestamps are implicit row indices; the data is equally spaced.
struct MetricDataset {
    std::string name;
    Matrix values; // T x m
    std::vector<std::string> metric_names;
    std::vector<std::uint8_t> labels; // empty, or length T with values in {0,1}

    std::size_t timestamps() const { return values.rows(); }
    std::size_t metrics() const { return values.cols(); }
    bool has_labels() const { return !labels.empty(); }
};

struct DatasetSplit {
    MetricDataset train;
    MetricDataset test;
};

inline void validate_dataset(const MetricDataset& d) {
    if (d.timestamps() == 0 || d.metrics() == 0)
        throw InputError("dataset '" + d.name + "' is empty");
    for (std::size_t r = 0; r < d.values.rows(); ++r)
        for (std::size_t c = 0; c < d.values.cols(); ++c)
            if (!std::isfinite(d.values(r, c)))
                throw InputError("dataset '" + d.name + "': non-finite value at (row " +
                                 std::to_string(r + 1) + ", col " + std::to_string(c + 1) + ")");
    if (!d.labels.empty()) {
        if (d.labels.size() != d.timestamps())
            throw InputError("dataset '" + d.name + "': labels length " +
                             std::to_string(d.labels.size()) + " does not match T=" +
                             std::to_string(d.timestamps()));
        for (std::size_t i = 0; i < d.labels.size(); ++i)
            if (d.labels[i] > 1)
                throw InputError("dataset '" + d.name + "': label at row " +
                                 std::to_string(i + 1) + " is not 0 or 1");
    }
}

inline void validate_split(const DatasetSplit& s) {
    validate_dataset(s.train);
    validate_dataset(s.test);
    if (s.train.metrics() != s.test.metrics())
        throw InputError("train/test metric count mismatch: " + std::to_string(s.train.metrics()) +
                         " vs " + std::to_string(s.test.metrics()));
    if (s.train.metric_names != s.test.metric_names)
        throw InputError("train/test metric names differ or are ordered differently");
    if (!s.test.has_labels())
        throw InputError("test dataset has no labels");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

// Locale-independent double parse; the whole field must be consumed.
inline std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
    return v;
}

// Shortest round-trip decimal form, at least 17 significant digits of fidelity.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    // A trailing blank line is not an observation.
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

inline std::uint8_t parse_label(std::string_view field, const std::string& where) {
    auto v = parse_double(field);
    if (!v || (*v != 0.0 && *v != 1.0))
        throw InputError(where + ": label value '" + std::string(field) + "' is not 0 or 1");
    return static_cast<std::uint8_t>(*v);
}

} // namespace detail

// CSV: UTF-8, comma-separated, header row, '.' decimal point. When has_labels is set the
// last column must be named exactly "label" and hold 0/1 values.
inline MetricDataset load_csv(const std::filesystem::path& path, bool has_labels) {
    auto lines = detail::read_lines(path);
    if (lines.empty()) throw InputError("empty input: " + path.string());

    auto header = detail::split_fields(lines[0]);
    if (has_labels) {
        if (header.empty() || header.back() != "label")
            throw InputError(path.string() + ": has_labels is set but the last column is '" +
                             (header.empty() ? std::string() : std::string(header.back())) +
                             "', expected 'label'");
    }
    const std::size_t ncols = header.size();
    const std::size_t m = has_labels ? ncols - 1 : ncols;
    if (m == 0) throw InputError(path.string() + ": no metric columns");
    const std::size_t nrows = lines.size() - 1;
    if (nrows == 0) throw InputError("empty input (header only): " + path.string());

    MetricDataset d;
    d.name = path.stem().string();
    for (std::size_t c = 0; c < m; ++c) d.metric_names.emplace_back(header[c]);
    d.values = Matrix(nrows, m);
    if (has_labels) d.labels.resize(nrows);

    for (std::size_t r = 0; r < nrows; ++r) {
        auto fields = detail::split_fields(lines[r + 1]);
        if (fields.size() != ncols)
            throw InputError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(ncols));
        for (std::size_t c = 0; c < m; ++c) {
            auto v = detail::parse_double(fields[c]);
            if (!v || !std::isfinite(*v))
                throw InputError(path.string() + ": non-finite or unparseable value '" +
                                 std::string(fields[c]) + "' at (row " + std::to_string(r + 1) +
                                 ", col " + std::to_string(c + 1) + ")");
            d.values(r, c) = *v;
        }
        if (has_labels)
            d.labels[r] = detail::parse_label(fields[m], path.string() + ": row " + std::to_string(r + 1));
    }
    validate_dataset(d);
    return d;
}

inline void save_csv(const MetricDataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path.string());
    for (std::size_t c = 0; c < d.metric_names.size(); ++c) {
        if (c) out << ',';
        out << d.metric_names[c];
    }
    if (d.has_labels()) out << ",label";
    out << '\n';
    for (std::size_t r = 0; r < d.timestamps(); ++r) {
        for (std::size_t c = 0; c < d.metrics(); ++c) {
            if (c) out << ',';
            out << detail::format_double(d.values(r, c));
        }
        if (d.has_labels()) out << ',' << int(d.labels[r]);
        out << '\n';
    }
    if (!out) throw InputError("write failed: " + path.string());
}

// Label file: one 0/1 per line.
inline std::vector<std::uint8_t> load_label_lines(const std::filesystem::path& path) {
    auto lines = detail::read_lines(path);
    if (lines.empty()) throw InputError("empty label file: " + path.string());
    std::vector<std::uint8_t> labels;
    labels.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i)
        labels.push_back(detail::parse_label(detail::trim(lines[i]),
                                             path.string() + ": line " + std::to_string(i + 1)));
    return labels;
}

// SMD-style plain text: one observation per line, comma-separated, no header.
// Metric names are synthesized as m0..m{k-1}.
inline MetricDataset load_smd_entity(const std::filesystem::path& data_path,
                                     const std::optional<std::filesystem::path>& label_path = std::nullopt) {
    auto lines = detail::read_lines(data_path);
    if (lines.empty()) throw InputError("empty input: " + data_path.string());

    MetricDataset d;
    d.name = data_path.stem().string();
    const std::size_t m = detail::split_fields(lines[0]).size();
    if (m == 0 || detail::trim(lines[0]).empty())
        throw InputError(data_path.string() + ": first line has no values");
    d.values = Matrix(lines.size(), m);
    for (std::size_t c = 0; c < m; ++c) d.metric_names.push_back("m" + std::to_string(c));

    for (std::size_t r = 0; r < lines.size(); ++r) {
        auto fields = detail::split_fields(lines[r]);
        if (fields.size() != m)
            throw InputError(data_path.string() + ": line " + std::to_string(r + 1) + " has " +
                             std::to_string(fields.size()) + " values, expected " + std::to_string(m));
        for (std::size_t c = 0; c < m; ++c) {
            auto v = detail::parse_double(fields[c]);
            if (!v || !std::isfinite(*v))
                throw InputError(data_path.string() + ": non-finite or unparseable value '" +
                                 std::string(fields[c]) + "' at (line " + std::to_string(r + 1) +
                                 ", col " + std::to_string(c + 1) + ")");
            d.values(r, c) = *v;
        }
    }

    if (label_path) {
        d.labels = load_label_lines(*label_path);
        if (d.labels.size() != d.timestamps())
            throw InputError(label_path->string() + ": " + std::to_string(d.labels.size()) +
                             " labels for " + std::to_string(d.timestamps()) + " observations");
    }
    validate_dataset(d);
    return d;
}

} // namespace cmanomaly
