#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmanomaly/error.hpp"

namespace cmanomaly {

// Fully resolved settings of one command invocation. Written next to the outputs as
// manifest.json; the same schema is accepted back as a --config file, with defaults
// below, then config values, then command-line flags taking precedence in that order.
struct RunManifest {
    std::string command;
    std::string config;
    std::string data;
    std::string labels;
    std::string model;
    std::string scores;
    std::string out = "out";
    std::size_t omega = 32;
    std::size_t tau_train = 5;
    std::size_t tau_test = 1;
    std::uint64_t seed = 0;
    bool ablate_cm = false;
    bool pooled_interactions = false;
    bool relu_output = false;
    bool l2_loss = false;
    bool adjust = true;
    std::size_t threads = 1;
    double threshold_step = 0.1;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    double loss_delta_stop = 1e-5;
    std::vector<std::size_t> hidden_widths{128, 64};
};

namespace detail {

using json = nlohmann::ordered_json;

inline std::string config_string(const json& j, const std::string& key) {
    if (!j.is_string()) throw InputError("config: '" + key + "' must be a string");
    return j.get<std::string>();
}

inline bool config_bool(const json& j, const std::string& key) {
    if (!j.is_boolean()) throw InputError("config: '" + key + "' must be a boolean");
    return j.get<bool>();
}

inline std::uint64_t config_uint(const json& j, const std::string& key) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw InputError("config: '" + key + "' must be a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline double config_double(const json& j, const std::string& key) {
    if (!j.is_number()) throw InputError("config: '" + key + "' must be a number");
    return j.get<double>();
}

inline std::vector<std::size_t> config_widths(const json& j, const std::string& key) {
    if (!j.is_array()) throw InputError("config: '" + key + "' must be an array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : j) out.push_back(static_cast<std::size_t>(config_uint(e, key)));
    return out;
}

} // namespace detail

// Applies the keys present in a config file onto `m`. Unknown keys are an error;
// "command" and "config" are accepted (so a manifest can be replayed) but never override.
inline void apply_config_file(RunManifest& m, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open config file: " + path);
    detail::json j;
    try {
        j = detail::json::parse(in);
    } catch (const detail::json::parse_error& e) {
        throw InputError("config: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw InputError("config: " + path + " must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (key == "command" || key == "config") continue;
        else if (key == "data") m.data = detail::config_string(value, key);
        else if (key == "labels") m.labels = detail::config_string(value, key);
        else if (key == "model") m.model = detail::config_string(value, key);
        else if (key == "scores") m.scores = detail::config_string(value, key);
        else if (key == "out") m.out = detail::config_string(value, key);
        else if (key == "omega") m.omega = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "tau_train") m.tau_train = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "tau_test") m.tau_test = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "seed") m.seed = detail::config_uint(value, key);
        else if (key == "ablate_cm") m.ablate_cm = detail::config_bool(value, key);
        else if (key == "pooled_interactions") m.pooled_interactions = detail::config_bool(value, key);
        else if (key == "relu_output") m.relu_output = detail::config_bool(value, key);
        else if (key == "l2_loss") m.l2_loss = detail::config_bool(value, key);
        else if (key == "adjust") m.adjust = detail::config_bool(value, key);
        else if (key == "threads") m.threads = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "threshold_step") m.threshold_step = detail::config_double(value, key);
        else if (key == "learning_rate") m.learning_rate = detail::config_double(value, key);
        else if (key == "batch_size") m.batch_size = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "max_epochs") m.max_epochs = static_cast<std::size_t>(detail::config_uint(value, key));
        else if (key == "loss_delta_stop") m.loss_delta_stop = detail::config_double(value, key);
        else if (key == "hidden_widths") m.hidden_widths = detail::config_widths(value, key);
        else throw InputError("config: unknown key '" + key + "'");
    }
}

inline void validate_manifest(const RunManifest& m) {
    if (m.omega == 0) throw InputError("omega must be at least 1");
    if (m.tau_train == 0 || m.tau_test == 0) throw InputError("stride must be at least 1");
    if (m.threads == 0) throw InputError("threads must be at least 1");
    if (m.batch_size == 0) throw InputError("batch size must be at least 1");
    if (m.max_epochs == 0) throw InputError("max epochs must be at least 1");
    if (!(m.threshold_step > 0.0)) throw InputError("threshold step must be positive");
    if (!(m.learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (m.loss_delta_stop < 0.0) throw InputError("loss delta stop must be nonnegative");
    for (std::size_t w : m.hidden_widths)
        if (w == 0) throw InputError("hidden widths must be positive");
    if (m.ablate_cm && m.pooled_interactions)
        throw InputError("ablation removes the interaction layer, pooling has nothing to act on");
}

inline detail::json manifest_to_json(const RunManifest& m) {
    detail::json j = detail::json::object();
    j["command"] = m.command;
    j["config"] = m.config;
    j["data"] = m.data;
    j["labels"] = m.labels;
    j["model"] = m.model;
    j["scores"] = m.scores;
    j["out"] = m.out;
    j["omega"] = m.omega;
    j["tau_train"] = m.tau_train;
    j["tau_test"] = m.tau_test;
    j["seed"] = m.seed;
    j["ablate_cm"] = m.ablate_cm;
    j["pooled_interactions"] = m.pooled_interactions;
    j["relu_output"] = m.relu_output;
    j["l2_loss"] = m.l2_loss;
    j["adjust"] = m.adjust;
    j["threads"] = m.threads;
    j["threshold_step"] = m.threshold_step;
    j["learning_rate"] = m.learning_rate;
    j["batch_size"] = m.batch_size;
    j["max_epochs"] = m.max_epochs;
    j["loss_delta_stop"] = m.loss_delta_stop;
    j["hidden_widths"] = m.hidden_widths;
    return j;
}

inline void save_manifest(const std::string& path, const RunManifest& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write manifest: " + path);
    out << manifest_to_json(m).dump(2) << "\n";
    if (!out) throw InputError("failed writing manifest: " + path);
}

} // namespace cmanomaly
