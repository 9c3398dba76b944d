#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "flowplan/gateway.hpp"
#include "flowplan/generator.hpp"
#include "flowplan/induction.hpp"
#include "flowplan/merge.hpp"
#include "flowplan/planner.hpp"

namespace flowplan {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MergeBackend { Algorithmic, Model };

struct PipelineConfig {
    // gateway
    GatewayMode mode = GatewayMode::Replay;
    double temperature = 0.2;
    int top_k = 10;
    int max_retries = 3;

    InductionConfig induction;
    MergeConfig merge;
    MergeBackend merge_backend = MergeBackend::Algorithmic;
    PlannerConfig planner;
    GeneratorConfig generator;

    // paths
    std::filesystem::path input;
    std::filesystem::path output_dir = ".";
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path few_shot_dir;

    std::string stop_after;  // empty | induce | merge | plan | generate

    json snapshot() const {
        return json{
            {"gateway",
             {{"mode", std::string(to_string(mode))},
              {"temperature", temperature},
              {"top_k", top_k},
              {"max_retries", max_retries}}},
            {"induction", {{"doc_char_budget", induction.doc_char_budget}}},
            {"merge",
             {{"dedup_similarity_threshold", merge.dedup_similarity_threshold},
              {"backend", merge_backend == MergeBackend::Model ? "model"
                                                               : "algorithmic"}}},
            {"planner",
             {{"k", planner.k}, {"tau_c", planner.tau_c},
              {"tau_s", planner.tau_s}}},
            {"generator",
             {{"threshold_entail", generator.threshold_entail},
              {"threshold_cover", generator.threshold_cover},
              {"max_attempts", generator.max_attempts}}},
            {"paths",
             {{"input", input.string()},
              {"output_dir", output_dir.string()},
              {"cache_dir", cache_dir.string()},
              {"few_shot_dir", few_shot_dir.string()}}},
            {"stop_after", stop_after}};
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace detail

// Parses a TOML-style key=value document into dotted keys. Supports
// [section] headers, "#" comments, and quoted string values.
inline std::map<std::string, std::string> parse_config_text(
    const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::unquote(detail::trim(line.substr(eq + 1)));
        if (!section.empty()) key = section + "." + key;
        out[key] = value;
    }
    return out;
}

inline void apply_config_entries(
    PipelineConfig& config, const std::map<std::string, std::string>& entries) {
    auto as_double = [](const std::string& k, const std::string& v) {
        try {
            return std::stod(v);
        } catch (...) {
            throw ConfigError("config key " + k + ": expected number, got " + v);
        }
    };
    auto as_int = [&](const std::string& k, const std::string& v) {
        return static_cast<int>(as_double(k, v));
    };
    auto in_unit = [&](const std::string& k, double v) {
        if (v < 0.0 || v > 1.0)
            throw ConfigError("config key " + k + ": value out of [0,1]");
        return v;
    };
    for (const auto& [key, value] : entries) {
        if (key == "gateway.mode") {
            if (value == "live") config.mode = GatewayMode::Live;
            else if (value == "record") config.mode = GatewayMode::Record;
            else if (value == "replay") config.mode = GatewayMode::Replay;
            else throw ConfigError("config: unknown gateway mode " + value);
        } else if (key == "gateway.temperature") {
            config.temperature = in_unit(key, as_double(key, value));
        } else if (key == "gateway.top_k") {
            config.top_k = as_int(key, value);
            if (config.top_k <= 0)
                throw ConfigError("config key gateway.top_k must be positive");
        } else if (key == "gateway.max_retries") {
            config.max_retries = as_int(key, value);
        } else if (key == "induction.doc_char_budget") {
            config.induction.doc_char_budget =
                static_cast<size_t>(as_int(key, value));
        } else if (key == "merge.dedup_similarity_threshold") {
            config.merge.dedup_similarity_threshold =
                in_unit(key, as_double(key, value));
        } else if (key == "merge.backend") {
            if (value == "algorithmic") config.merge_backend = MergeBackend::Algorithmic;
            else if (value == "model") config.merge_backend = MergeBackend::Model;
            else throw ConfigError("config: unknown merge backend " + value);
        } else if (key == "planner.k") {
            config.planner.k = as_int(key, value);
            if (config.planner.k < 1)
                throw ConfigError("config key planner.k must be >= 1");
        } else if (key == "planner.tau_c") {
            config.planner.tau_c = in_unit(key, as_double(key, value));
        } else if (key == "planner.tau_s") {
            config.planner.tau_s = in_unit(key, as_double(key, value));
        } else if (key == "generator.threshold_entail") {
            config.generator.threshold_entail =
                in_unit(key, as_double(key, value));
        } else if (key == "generator.threshold_cover") {
            config.generator.threshold_cover =
                in_unit(key, as_double(key, value));
        } else if (key == "generator.max_attempts") {
            config.generator.max_attempts = as_int(key, value);
            if (config.generator.max_attempts < 1)
                throw ConfigError(
                    "config key generator.max_attempts must be >= 1");
        } else if (key == "paths.input") {
            config.input = value;
        } else if (key == "paths.output_dir") {
            config.output_dir = value;
        } else if (key == "paths.replay_cache") {
            config.cache_dir = value;
        } else if (key == "paths.few_shot_store") {
            config.few_shot_dir = value;
        } else if (key == "stages.stop_after") {
            config.stop_after = value;
        } else {
            throw ConfigError("config: unknown key " + key);
        }
    }
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    PipelineConfig config;
    apply_config_entries(config, parse_config_text(buf.str()));
    return config;
}

}  // namespace flowplan
