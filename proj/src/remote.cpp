#include "clarion/remote.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "clarion/errors.hpp"

namespace clarion {

HttpChatClient::HttpChatClient(HttpChatOptions options) : options_(std::move(options))
{
    auto const &url = options_.endpoint;
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
        throw UsageError("judge endpoint must be an http:// URL: '" + url + "'");
    }
    auto const path_start = url.find('/', scheme_end + 3);
    host_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (options_.attempts < 1) {
        options_.attempts = 1;
    }
}

std::string HttpChatClient::complete(std::string const &prompt)
{
    nlohmann::json body = {
        {"model", options_.model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
        {"temperature", 0},
    };
    auto const payload = body.dump();
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }

    std::string last_error;
    auto delay = options_.backoff;
    for (int attempt = 0; attempt < options_.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        httplib::Client client(host_);
        auto const secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
        auto const usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "request failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            if (res->status >= 400 && res->status < 500 && res->status != 429) {
                break;
            }
            continue;
        }
        try {
            auto reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (nlohmann::json::exception const &e) {
            last_error = std::string("malformed reply: ") + e.what();
        }
    }
    throw RemoteError(options_.endpoint, last_error);
}

HttpChatOptions chat_options_from_env()
{
    HttpChatOptions opts;
    char const *endpoint = std::getenv("JUDGE_ENDPOINT");
    if (endpoint == nullptr || *endpoint == '\0') {
        throw UsageError("JUDGE_ENDPOINT is not set");
    }
    opts.endpoint = endpoint;
    if (char const *key = std::getenv("JUDGE_API_KEY")) {
        opts.api_key = key;
    }
    if (char const *model = std::getenv("JUDGE_MODEL"); model != nullptr && *model != '\0') {
        opts.model = model;
    }
    return opts;
}

} // namespace clarion
