#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "flowplan/gateway.hpp"

namespace flowplan {

struct ProviderSettings {
    std::string endpoint;  // e.g. https://api.example.com
    std::string api_key;
    std::string model;

    // Env vars: FLOWPLAN_ENDPOINT, FLOWPLAN_API_KEY, FLOWPLAN_MODEL.
    static ProviderSettings from_env() {
        auto get = [](const char* name) {
            const char* v = std::getenv(name);
            return v ? std::string(v) : std::string{};
        };
        return {get("FLOWPLAN_ENDPOINT"), get("FLOWPLAN_API_KEY"),
                get("FLOWPLAN_MODEL")};
    }
};

// OpenAI-compatible chat completions transport.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(ProviderSettings settings)
        : settings_(std::move(settings)) {
        if (settings_.endpoint.empty())
            throw GatewayError("provider endpoint not configured");
    }

    std::string complete(const PromptRequest& request) override {
        nlohmann::json messages = nlohmann::json::array();
        if (!request.system_text.empty())
            messages.push_back({{"role", "system"}, {"content", request.system_text}});
        for (const auto& [in, out] : request.few_shot) {
            messages.push_back({{"role", "user"}, {"content", in}});
            messages.push_back({{"role", "assistant"}, {"content", out}});
        }
        messages.push_back({{"role", "user"}, {"content", request.user_text}});
        nlohmann::json body = {{"model", settings_.model},
                               {"messages", messages},
                               {"temperature", request.temperature},
                               {"top_k", request.top_k}};

        httplib::Client client(settings_.endpoint);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!settings_.api_key.empty())
            headers.emplace("Authorization", "Bearer " + settings_.api_key);
        auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                               "application/json");
        if (!res)
            throw std::runtime_error("connection failed: " +
                                     httplib::to_string(res.error()));
        if (res->status != 200)
            throw std::runtime_error("provider returned HTTP " +
                                     std::to_string(res->status));
        auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content")
            .get<std::string>();
    }

private:
    ProviderSettings settings_;
};

}  // namespace flowplan
