#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace toporag::testing {

// Loopback HTTP server that records each request body and answers through a
// user handler. A handler returning a negative status replies 500.
class MockServer {
public:
    using Handler = std::function<int(const nlohmann::json& body, nlohmann::json& reply)>;

    explicit MockServer(Handler handler) : handler_(std::move(handler)) {
        auto serve = [this](const httplib::Request& req, httplib::Response& res) {
            nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
            {
                std::lock_guard lock(mutex_);
                requests_.push_back(body);
                auth_.push_back(req.get_header_value("Authorization"));
            }
            nlohmann::json reply;
            const int status = handler_(body, reply);
            res.status = status < 0 ? 500 : status;
            res.set_content(reply.dump(), "application/json");
        };
        server_.Post("/embed", serve);
        server_.Post("/generate", serve);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::vector<nlohmann::json> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

    std::vector<std::string> auth_headers() const {
        std::lock_guard lock(mutex_);
        return auth_;
    }

private:
    Handler handler_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::vector<nlohmann::json> requests_;
    std::vector<std::string> auth_;
};

}  // namespace toporag::testing
