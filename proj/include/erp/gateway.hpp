#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "erp/errors.hpp"
#include "erp/sha256.hpp"

namespace erp {

// ---------------------------------------------------------------------------
// Requests and exchanges

enum class Role { system, user, assistant };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

inline std::optional<Role> parse_role(std::string_view name) {
    if (name == "system") return Role::system;
    if (name == "user") return Role::user;
    if (name == "assistant") return Role::assistant;
    return std::nullopt;
}

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::vector<std::string> stop;
};

inline ChatRequest make_user_request(std::string model_id, std::string prompt,
                                     double temperature = 0.0,
                                     int max_tokens = 1024) {
    ChatRequest req;
    req.model_id = std::move(model_id);
    req.messages.push_back({Role::user, std::move(prompt)});
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    return req;
}

inline void validate_request(const ChatRequest& req) {
    require(!req.model_id.empty(), Errc::invalid_argument, "model_id empty");
    require(!req.messages.empty(), Errc::invalid_argument, "messages empty");
    for (const auto& m : req.messages) {
        if (m.role == Role::system) continue;
        require(m.role == Role::user, Errc::invalid_argument,
                "first non-system message must be from the user");
        break;
    }
    require(req.temperature >= 0.0 && req.temperature <= 2.0,
            Errc::invalid_argument, "temperature must be within [0, 2]");
    require(req.max_tokens >= 1, Errc::invalid_argument,
            "max_tokens must be positive");
}

// Canonical JSON body. nlohmann::json keeps object keys sorted, so the
// dump is stable; message content is hashed verbatim, never normalized.
inline nlohmann::json request_to_json(const ChatRequest& req) {
    nlohmann::json j;
    j["model"] = req.model_id;
    auto msgs = nlohmann::json::array();
    for (const auto& m : req.messages) {
        msgs.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    j["messages"] = msgs;
    j["temperature"] = req.temperature;
    j["max_tokens"] = req.max_tokens;
    if (!req.stop.empty()) j["stop"] = req.stop;
    return j;
}

inline ChatRequest request_from_json(const nlohmann::json& j) {
    ChatRequest req;
    req.model_id = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        auto role = parse_role(m.at("role").get<std::string>());
        require(role.has_value(), Errc::malformed_record, "unknown role");
        req.messages.push_back({*role, m.at("content").get<std::string>()});
    }
    req.temperature = j.at("temperature").get<double>();
    req.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("stop")) {
        req.stop = j.at("stop").get<std::vector<std::string>>();
    }
    return req;
}

// Content address of a request: equal canonical requests hash equal, any
// field change moves the digest.
inline std::string cache_key(const ChatRequest& req) {
    return sha256_hex(request_to_json(req).dump());
}

enum class FinishReason { stop, length, other };

inline const char* finish_reason_name(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::other: return "other";
    }
    return "?";
}

inline FinishReason parse_finish_reason(std::string_view name) {
    if (name == "stop") return FinishReason::stop;
    if (name == "length") return FinishReason::length;
    return FinishReason::other;
}

struct Usage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatExchange {
    ChatRequest request;
    std::string response_text;
    FinishReason finish_reason = FinishReason::other;
    Usage usage;
    long latency_ms = 0;
    int attempt_count = 1;   // attempts used by the original fetch
    bool cache_hit = false;  // true when served from the persistent cache
};

inline nlohmann::json exchange_to_json(const ChatExchange& ex) {
    nlohmann::json j;
    j["request"] = request_to_json(ex.request);
    j["response_text"] = ex.response_text;
    j["finish_reason"] = finish_reason_name(ex.finish_reason);
    j["usage"] = {{"prompt_tokens", ex.usage.prompt_tokens},
                  {"completion_tokens", ex.usage.completion_tokens}};
    j["latency_ms"] = ex.latency_ms;
    j["attempt_count"] = ex.attempt_count;
    return j;
}

inline ChatExchange exchange_from_json(const nlohmann::json& j) {
    ChatExchange ex;
    ex.request = request_from_json(j.at("request"));
    ex.response_text = j.at("response_text").get<std::string>();
    ex.finish_reason =
        parse_finish_reason(j.at("finish_reason").get<std::string>());
    ex.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<long>();
    ex.usage.completion_tokens =
        j.at("usage").at("completion_tokens").get<long>();
    ex.latency_ms = j.at("latency_ms").get<long>();
    ex.attempt_count = j.at("attempt_count").get<int>();
    return ex;
}

// ---------------------------------------------------------------------------
// Backends: transport-level POST of a chat-completions body

struct RawCompletion {
    int status = 0;
    std::string body;
};

class Backend {
  public:
    virtual ~Backend() = default;
    // May throw Error(transport) when no HTTP response was obtained.
    virtual RawCompletion post_chat(const std::string& request_body) = 0;
};

// Scripted backend for tests and offline reruns. Entries match by request
// digest first, then fall back to scripted order; an unmatched request is
// a hard failure so prompt drift cannot pass silently.
class ReplayBackend : public Backend {
  public:
    struct Entry {
        std::string match_digest;  // empty = positional
        std::string response_text;
        std::string finish_reason = "stop";
        Usage usage;
        int status = 200;    // non-200 scripts an HTTP failure
        long delay_ms = 0;   // simulated service latency
        bool consumed = false;
    };

    ReplayBackend() = default;
    explicit ReplayBackend(std::vector<Entry> script)
        : script_(std::move(script)) {}

    // Ordered JSON-lines: {"match": "<digest>"?, "response_text": ...,
    // "finish_reason"?, "usage"? {...}, "status"?, "delay_ms"?}
    static std::shared_ptr<ReplayBackend> from_file(
        const std::filesystem::path& path) {
        std::ifstream in(path);
        require(in.good(), Errc::io_error,
                "cannot open replay script: " + path.string());
        std::vector<Entry> script;
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            require(!j.is_discarded() && j.is_object(), Errc::malformed_record,
                    "replay script line " + std::to_string(line_no) +
                        ": invalid JSON");
            Entry e;
            if (j.contains("match") && j.at("match").is_string()) {
                e.match_digest = j.at("match").get<std::string>();
            }
            e.response_text = j.value("response_text", std::string());
            e.finish_reason = j.value("finish_reason", std::string("stop"));
            if (j.contains("usage")) {
                e.usage.prompt_tokens =
                    j.at("usage").value("prompt_tokens", 0L);
                e.usage.completion_tokens =
                    j.at("usage").value("completion_tokens", 0L);
            }
            e.status = j.value("status", 200);
            e.delay_ms = j.value("delay_ms", 0L);
            script.push_back(std::move(e));
        }
        return std::make_shared<ReplayBackend>(std::move(script));
    }

    void add(Entry e) {
        std::lock_guard<std::mutex> lock(mu_);
        script_.push_back(std::move(e));
    }

    // Convenience: script the next positional response.
    void add_text(std::string text, long delay_ms = 0) {
        Entry e;
        e.response_text = std::move(text);
        e.delay_ms = delay_ms;
        add(std::move(e));
    }

    void add_for_digest(std::string digest, std::string text) {
        Entry e;
        e.match_digest = std::move(digest);
        e.response_text = std::move(text);
        add(std::move(e));
    }

    void add_status(int status, std::string message = "scripted failure") {
        Entry e;
        e.status = status;
        e.response_text = std::move(message);
        add(std::move(e));
    }

    RawCompletion post_chat(const std::string& request_body) override {
        Entry entry;
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++calls_;
            int now = ++in_flight_;
            if (now > max_in_flight_) max_in_flight_ = now;
            std::string digest = sha256_hex(request_body);
            Entry* found = nullptr;
            for (auto& e : script_) {
                if (!e.consumed && !e.match_digest.empty() &&
                    e.match_digest == digest) {
                    found = &e;
                    break;
                }
            }
            if (!found) {
                for (auto& e : script_) {
                    if (!e.consumed && e.match_digest.empty()) {
                        found = &e;
                        break;
                    }
                }
            }
            if (!found) {
                --in_flight_;
                fail(Errc::replay_unmatched,
                     "replay script has no entry for request digest " + digest);
            }
            found->consumed = true;
            entry = *found;
        }
        if (entry.delay_ms > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(entry.delay_ms));
        }
        {
            std::lock_guard<std::mutex> lock(mu_);
            --in_flight_;
        }
        if (entry.status != 200) {
            nlohmann::json err = {
                {"error", {{"message", entry.response_text}}}};
            return {entry.status, err.dump()};
        }
        nlohmann::json body = {
            {"choices",
             nlohmann::json::array(
                 {{{"message", {{"role", "assistant"},
                                {"content", entry.response_text}}},
                   {"finish_reason", entry.finish_reason}}})},
            {"usage",
             {{"prompt_tokens", entry.usage.prompt_tokens},
              {"completion_tokens", entry.usage.completion_tokens}}}};
        return {200, body.dump()};
    }

    int calls() const {
        std::lock_guard<std::mutex> lock(mu_);
        return calls_;
    }
    int max_in_flight() const {
        std::lock_guard<std::mutex> lock(mu_);
        return max_in_flight_;
    }
    size_t remaining() const {
        std::lock_guard<std::mutex> lock(mu_);
        size_t n = 0;
        for (const auto& e : script_) n += e.consumed ? 0 : 1;
        return n;
    }

  private:
    mutable std::mutex mu_;
    std::vector<Entry> script_;
    int calls_ = 0;
    int in_flight_ = 0;
    int max_in_flight_ = 0;
};

// ---------------------------------------------------------------------------
// Retry and rate limiting

struct RetryPolicy {
    int max_attempts = 4;
    long base_delay_ms = 200;
    long max_delay_ms = 4000;

    // Exponential, no jitter: deterministic and monotone non-decreasing.
    long delay_for_attempt(int attempt) const {
        require(attempt >= 1, Errc::invalid_argument, "attempt is 1-based");
        long delay = base_delay_ms;
        for (int i = 1; i < attempt && delay < max_delay_ms; ++i) {
            delay *= 2;
        }
        return std::min(delay, max_delay_ms);
    }
};

struct RateLimit {
    int requests_per_minute = 0;  // 0 = unlimited
    long tokens_per_minute = 0;   // 0 = unlimited; charged at max_tokens
};

// ---------------------------------------------------------------------------
// Gateway

struct GatewayOptions {
    std::filesystem::path cache_dir;  // empty disables the cache
    RetryPolicy retry;
    RateLimit rate_limit;
    // Injectable for tests; defaults are the real clock and real sleep.
    std::function<long()> clock_ms;
    std::function<void(long)> sleep_ms;
};

struct Outcome {
    std::optional<ChatExchange> exchange;
    std::optional<Errc> error;
    std::string error_message;

    bool ok() const { return exchange.has_value(); }
};

class ModelGateway {
  public:
    ModelGateway(std::shared_ptr<Backend> backend, GatewayOptions options = {})
        : backend_(std::move(backend)), opt_(std::move(options)) {
        require(backend_ != nullptr, Errc::invalid_argument, "null backend");
        if (!opt_.clock_ms) {
            opt_.clock_ms = [] {
                return static_cast<long>(
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count());
            };
        }
        if (!opt_.sleep_ms) {
            opt_.sleep_ms = [](long ms) {
                std::this_thread::sleep_for(std::chrono::milliseconds(ms));
            };
        }
        if (!opt_.cache_dir.empty()) {
            std::filesystem::create_directories(opt_.cache_dir);
        }
    }

    ChatExchange complete(const ChatRequest& req) {
        validate_request(req);
        const std::string digest = cache_key(req);

        if (auto cached = read_cache(digest)) {
            cached->cache_hit = true;
            ++cache_hits_;
            return *cached;
        }

        acquire_budget(req);
        const std::string body = request_to_json(req).dump();
        const long started = opt_.clock_ms();

        std::string last_transport;
        for (int attempt = 1;; ++attempt) {
            RawCompletion raw;
            bool transport_failed = false;
            try {
                raw = backend_->post_chat(body);
            } catch (const Error& e) {
                if (e.code() != Errc::transport) throw;
                transport_failed = true;
                last_transport = e.what();
            }

            if (!transport_failed) {
                if (raw.status == 200) {
                    ChatExchange ex = parse_success(req, raw.body);
                    ex.attempt_count = attempt;
                    ex.latency_ms = opt_.clock_ms() - started;
                    write_cache(digest, ex);
                    return ex;
                }
                if (raw.status == 401 || raw.status == 403) {
                    fail(Errc::auth_failed,
                         "authentication rejected (HTTP " +
                             std::to_string(raw.status) + ")");
                }
                bool retryable = raw.status == 429 || raw.status >= 500;
                if (!retryable) {
                    fail(Errc::transport, "unexpected HTTP status " +
                                              std::to_string(raw.status) +
                                              ": " + raw.body);
                }
                if (attempt >= opt_.retry.max_attempts) {
                    if (raw.status == 429) {
                        fail(Errc::rate_limited_exhausted,
                             "still rate limited after " +
                                 std::to_string(attempt) + " attempts");
                    }
                    fail(Errc::transport,
                         "HTTP " + std::to_string(raw.status) + " persisted " +
                             "after " + std::to_string(attempt) + " attempts");
                }
            } else if (attempt >= opt_.retry.max_attempts) {
                fail(Errc::transport, "transport failed after " +
                                          std::to_string(attempt) +
                                          " attempts: " + last_transport);
            }
            opt_.sleep_ms(opt_.retry.delay_for_attempt(attempt));
        }
    }

    std::vector<Outcome> complete_batch(
        const std::vector<ChatRequest>& requests, int parallelism,
        std::function<bool()> cancelled = {}) {
        require(parallelism >= 1, Errc::invalid_argument,
                "parallelism must be >= 1");
        std::vector<Outcome> results(requests.size());
        if (requests.empty()) return results;

        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= requests.size()) return;
                if (cancelled && cancelled()) {
                    results[i].error = Errc::cancelled;
                    results[i].error_message = "cancelled before dispatch";
                    continue;
                }
                try {
                    results[i].exchange = complete(requests[i]);
                } catch (const Error& e) {
                    results[i].error = e.code();
                    results[i].error_message = e.what();
                } catch (const std::exception& e) {
                    results[i].error = Errc::transport;
                    results[i].error_message = e.what();
                }
            }
        };

        size_t n_workers =
            std::min(static_cast<size_t>(parallelism), requests.size());
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        return results;
    }

    size_t cache_hits() const { return cache_hits_.load(); }
    const GatewayOptions& options() const { return opt_; }

  private:
    std::optional<ChatExchange> read_cache(const std::string& digest) {
        if (opt_.cache_dir.empty()) return std::nullopt;
        auto path = opt_.cache_dir / (digest + ".json");
        std::ifstream in(path, std::ios::binary);
        if (!in.good()) return std::nullopt;
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        require(!j.is_discarded(), Errc::malformed_record,
                "corrupt cache entry: " + path.string());
        return exchange_from_json(j);
    }

    void write_cache(const std::string& digest, const ChatExchange& ex) {
        if (opt_.cache_dir.empty()) return;
        auto path = opt_.cache_dir / (digest + ".json");
        auto tmp = opt_.cache_dir / (digest + ".json.tmp");
        {
            std::ofstream out(tmp, std::ios::binary);
            require(out.good(), Errc::io_error,
                    "cannot write cache entry: " + tmp.string());
            out << exchange_to_json(ex).dump(2) << '\n';
        }
        std::filesystem::rename(tmp, path);
    }

    // Sliding one-minute window over request count and charged tokens.
    // Waits (via the injected sleep) until the new call fits the budget.
    void acquire_budget(const ChatRequest& req) {
        if (opt_.rate_limit.requests_per_minute <= 0 &&
            opt_.rate_limit.tokens_per_minute <= 0) {
            return;
        }
        std::unique_lock<std::mutex> lock(budget_mu_);
        for (;;) {
            long now = opt_.clock_ms();
            while (!window_.empty() && window_.front().first <= now - 60000) {
                window_.pop_front();
            }
            long tokens_used = 0;
            for (const auto& [_, tok] : window_) tokens_used += tok;
            bool over_requests =
                opt_.rate_limit.requests_per_minute > 0 &&
                window_.size() >=
                    static_cast<size_t>(opt_.rate_limit.requests_per_minute);
            bool over_tokens = opt_.rate_limit.tokens_per_minute > 0 &&
                               tokens_used + req.max_tokens >
                                   opt_.rate_limit.tokens_per_minute;
            if (!over_requests && !over_tokens) {
                window_.emplace_back(now, req.max_tokens);
                return;
            }
            long wait = window_.empty()
                            ? 1000
                            : window_.front().first + 60000 - now;
            lock.unlock();
            opt_.sleep_ms(std::max(wait, 1L));
            lock.lock();
        }
    }

    ChatExchange parse_success(const ChatRequest& req,
                               const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        require(!j.is_discarded(), Errc::malformed_response,
                "response body is not JSON");
        require(j.contains("choices") && j.at("choices").is_array() &&
                    !j.at("choices").empty(),
                Errc::malformed_response, "response has no choices");
        const auto& choice = j.at("choices").at(0);
        require(choice.contains("message") &&
                    choice.at("message").contains("content") &&
                    choice.at("message").at("content").is_string(),
                Errc::malformed_response, "choice has no message content");
        ChatExchange ex;
        ex.request = req;
        ex.response_text =
            choice.at("message").at("content").get<std::string>();
        ex.finish_reason = parse_finish_reason(
            choice.value("finish_reason", std::string("other")));
        if (j.contains("usage") && j.at("usage").is_object()) {
            ex.usage.prompt_tokens = j.at("usage").value("prompt_tokens", 0L);
            ex.usage.completion_tokens =
                j.at("usage").value("completion_tokens", 0L);
        }
        return ex;
    }

    std::shared_ptr<Backend> backend_;
    GatewayOptions opt_;
    std::atomic<size_t> cache_hits_{0};
    std::mutex budget_mu_;
    std::deque<std::pair<long, long>> window_;  // (arrival ms, charged tokens)
};

}  // namespace erp
