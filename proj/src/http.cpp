#include "toporag/http.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace toporag {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string base;    // path prefix without trailing slash
};

Url split_url(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) throw ValidationError("endpoint \"" + endpoint + "\" is not a URL");
    const auto slash = endpoint.find('/', scheme + 3);
    Url url;
    url.origin = endpoint.substr(0, slash);
    url.base = slash == std::string::npos ? "" : endpoint.substr(slash);
    while (!url.base.empty() && url.base.back() == '/') url.base.pop_back();
    return url;
}

}  // namespace

nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, const std::string& auth_env,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry) {
    const Url url = split_url(endpoint);
    httplib::Client client(url.origin);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    if (!auth_env.empty()) {
        if (const char* token = std::getenv(auth_env.c_str()); token && *token) {
            client.set_bearer_token_auth(token);
        }
    }

    const std::string payload = body.dump();
    std::string last_error = "no attempt made";
    auto backoff = retry.initial_backoff;
    for (int attempt = 0; attempt < std::max(1, retry.max_attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(url.base + path, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            last_error = std::string("invalid JSON reply: ") + e.what();
        }
    }
    throw RemoteError("POST " + endpoint + path + " failed after " +
                      std::to_string(std::max(1, retry.max_attempts)) + " attempts (" + last_error + ")");
}

}  // namespace toporag
