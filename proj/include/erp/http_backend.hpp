#pragma once

#include <string>

#include <httplib.h>

#include "erp/errors.hpp"
#include "erp/gateway.hpp"

namespace erp {

// Talks to any chat-completions-compatible endpoint. The credential comes
// from the caller (typically an environment variable); the base URL may
// carry a path prefix, e.g. "https://api.example.com/v1".
class HttpBackend : public Backend {
  public:
    HttpBackend(std::string base_url, std::string api_key,
                long read_timeout_s = 120)
        : api_key_(std::move(api_key)), read_timeout_s_(read_timeout_s) {
        require(!base_url.empty(), Errc::invalid_argument, "base_url empty");
        while (base_url.ends_with('/')) base_url.pop_back();
        auto scheme_end = base_url.find("://");
        require(scheme_end != std::string::npos, Errc::invalid_argument,
                "base_url needs a scheme: " + base_url);
        auto path_start = base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            origin_ = base_url;
        } else {
            origin_ = base_url.substr(0, path_start);
            path_prefix_ = base_url.substr(path_start);
        }
    }

    RawCompletion post_chat(const std::string& request_body) override {
        // one client per call: httplib clients are not safe to share
        // across the batch workers
        httplib::Client client(origin_);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(read_timeout_s_, 0);
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }
        auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               request_body, "application/json");
        if (!res) {
            fail(Errc::transport,
                 "HTTP request failed: " + httplib::to_string(res.error()));
        }
        return {res->status, res->body};
    }

    const std::string& origin() const { return origin_; }
    const std::string& path_prefix() const { return path_prefix_; }

  private:
    std::string origin_;
    std::string path_prefix_;
    std::string api_key_;
    long read_timeout_s_;
};

}  // namespace erp
