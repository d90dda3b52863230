#pragma once

#include "toporag/common.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <string>

namespace toporag {

/// A remote call failed after all retries.
class RemoteError : public Error {
public:
    using Error::Error;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
};

/// POST `body` as JSON to endpoint + path and parse a JSON reply. Non-200
/// replies and transport failures are retried with exponential backoff. The
/// bearer token is read from `auth_env` when that variable is set.
nlohmann::json post_json(const std::string& endpoint, const std::string& path,
                         const nlohmann::json& body, const std::string& auth_env,
                         std::chrono::milliseconds timeout, const RetryPolicy& retry);

}  // namespace toporag
