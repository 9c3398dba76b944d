#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowplan/graph.hpp"  // fnv1a64 / hex64

namespace flowplan {

namespace fs = std::filesystem;

struct PromptRequest {
    std::string system_text;
    std::string user_text;
    std::vector<std::pair<std::string, std::string>> few_shot;
    double temperature = 0.2;
    int top_k = 10;
    std::string tag;  // induction | graph | merge | plan | generate | judge
};

enum class CompletionSource { Live, Replay };

struct Completion {
    std::string text;
    std::string request_hash;
    CompletionSource source = CompletionSource::Live;
};

struct GatewayError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ReplayMissError : GatewayError {
    std::string hash, tag;
    ReplayMissError(std::string h, std::string t)
        : GatewayError("replay miss for hash " + h + " (tag " + t + ")"),
          hash(std::move(h)),
          tag(std::move(t)) {}
};

struct TransportError : GatewayError {
    int attempts = 0;
    TransportError(const std::string& msg, int n)
        : GatewayError(msg + " (after " + std::to_string(n) + " attempts)"),
          attempts(n) {}
};

inline std::string normalize_newlines(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            out.push_back('\n');
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

// Canonical request hash. Byte layout: each field as "<name>=<len>:<bytes>\n"
// in fixed order, text fields newline-normalized to LF, temperature printed
// with six decimals. Stable across processes and platforms.
inline std::string canonical_hash(const PromptRequest& r) {
    std::string buf;
    auto put = [&buf](std::string_view name, std::string_view value) {
        buf += name;
        buf += '=';
        buf += std::to_string(value.size());
        buf += ':';
        buf += value;
        buf += '\n';
    };
    put("system", normalize_newlines(r.system_text));
    put("user", normalize_newlines(r.user_text));
    put("nshot", std::to_string(r.few_shot.size()));
    for (const auto& [in, out] : r.few_shot) {
        put("shot_in", normalize_newlines(in));
        put("shot_out", normalize_newlines(out));
    }
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6f", r.temperature);
    put("temperature", temp);
    put("top_k", std::to_string(r.top_k));
    put("tag", r.tag);
    return hex64(fnv1a64(buf));
}

// Transport abstraction. Live backends may throw TransportError-compatible
// exceptions; the gateway handles retries.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const PromptRequest& request) = 0;
};

enum class GatewayMode { Live, Record, Replay };

inline std::string_view to_string(GatewayMode m) {
    switch (m) {
        case GatewayMode::Live: return "live";
        case GatewayMode::Record: return "record";
        case GatewayMode::Replay: return "replay";
    }
    return "?";
}

struct CallRecord {
    std::string tag;
    std::string hash;
    PromptRequest request;
};

// Provider-agnostic model access with record/replay.
// Replay store layout: cache/<tag>/<hash>.txt + cache/manifest.json.
class Gateway {
public:
    Gateway(GatewayMode mode, fs::path cache_dir,
            std::shared_ptr<Backend> backend = nullptr, int max_retries = 3)
        : mode_(mode),
          cache_dir_(std::move(cache_dir)),
          backend_(std::move(backend)),
          max_retries_(max_retries) {}

    Completion complete(const PromptRequest& request) {
        const std::string hash = canonical_hash(request);
        {
            std::lock_guard lock(log_mutex_);
            log_.push_back({request.tag, hash, request});
        }
        if (mode_ == GatewayMode::Replay) {
            auto text = read_cached(request.tag, hash);
            if (!text) throw ReplayMissError(hash, request.tag);
            return {*text, hash, CompletionSource::Replay};
        }
        std::string text = call_with_retries(request);
        if (mode_ == GatewayMode::Record) write_cached(request.tag, hash, text);
        return {text, hash, CompletionSource::Live};
    }

    std::vector<CallRecord> log() const {
        std::lock_guard lock(log_mutex_);
        return log_;
    }

    size_t call_count(std::string_view tag) const {
        std::lock_guard lock(log_mutex_);
        size_t n = 0;
        for (const auto& rec : log_)
            if (rec.tag == tag) ++n;
        return n;
    }

    void clear_log() {
        std::lock_guard lock(log_mutex_);
        log_.clear();
    }

    GatewayMode mode() const { return mode_; }
    const fs::path& cache_dir() const { return cache_dir_; }

private:
    std::string call_with_retries(const PromptRequest& request) {
        if (!backend_) throw GatewayError("no backend configured for live mode");
        std::string last_error;
        for (int attempt = 1; attempt <= max_retries_; ++attempt) {
            try {
                return backend_->complete(request);
            } catch (const std::exception& ex) {
                last_error = ex.what();
                if (attempt < max_retries_) {
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(100 << (attempt - 1)));
                }
            }
        }
        throw TransportError("transport failure: " + last_error, max_retries_);
    }

    std::optional<std::string> read_cached(const std::string& tag,
                                           const std::string& hash) const {
        fs::path p = cache_dir_ / tag / (hash + ".txt");
        std::ifstream in(p, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    void write_cached(const std::string& tag, const std::string& hash,
                      const std::string& text) {
        std::lock_guard lock(store_mutex_);
        fs::create_directories(cache_dir_ / tag);
        {
            std::ofstream out(cache_dir_ / tag / (hash + ".txt"),
                              std::ios::binary);
            out << text;
        }
        fs::path manifest_path = cache_dir_ / "manifest.json";
        nlohmann::json manifest = nlohmann::json::object();
        if (std::ifstream in(manifest_path); in) {
            try {
                in >> manifest;
            } catch (...) {
                manifest = nlohmann::json::object();
            }
        }
        manifest[hash] = tag;
        std::ofstream out(manifest_path);
        out << manifest.dump(2) << "\n";
    }

    GatewayMode mode_;
    fs::path cache_dir_;
    std::shared_ptr<Backend> backend_;
    int max_retries_;
    mutable std::mutex log_mutex_;
    std::mutex store_mutex_;
    std::vector<CallRecord> log_;
};

}  // namespace flowplan
