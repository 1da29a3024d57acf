#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "hot/prompts.hpp"
#include "hot/util.hpp"

namespace hot {

// ---------------------------------------------------------------------------
// Request shapes
// ---------------------------------------------------------------------------

// Chat-completions request parameters. Defaults are the deterministic
// annotation policy: temperature 0, top_p 1, no penalties.
struct RequestParams {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<int> max_tokens;
    double presence_penalty = 0.0;
    double frequency_penalty = 0.0;

    void validate() const {
        if (temperature < 0.0 || temperature > 2.0)
            throw std::invalid_argument("temperature outside [0,2]");
        if (!(top_p > 0.0) || top_p > 1.0) throw std::invalid_argument("top_p outside (0,1]");
        if (presence_penalty < -2.0 || presence_penalty > 2.0)
            throw std::invalid_argument("presence_penalty outside [-2,2]");
        if (frequency_penalty < -2.0 || frequency_penalty > 2.0)
            throw std::invalid_argument("frequency_penalty outside [-2,2]");
        if (max_tokens && *max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
    }

    // Stable hash over the fixed-decimal rendering; cassette keys depend on it.
    std::string fingerprint() const {
        std::string canon = "model=" + model + ";temperature=" + format_fixed(temperature) +
                            ";top_p=" + format_fixed(top_p) +
                            ";max_tokens=" + (max_tokens ? std::to_string(*max_tokens) : "none") +
                            ";presence_penalty=" + format_fixed(presence_penalty) +
                            ";frequency_penalty=" + format_fixed(frequency_penalty);
        return to_hex(fnv1a64(canon));
    }
};

struct RequestKey {
    std::string prompt;      // "P1".."P5"
    std::string concept_name;
    std::string comment_id;
    int iteration = 0;
    std::string params_fp;

    std::string cache_key() const {
        return prompt + "|" + concept_name + "|" + comment_id + "|" + std::to_string(iteration) +
               "|" + params_fp;
    }

    nlohmann::json to_json() const {
        return {{"prompt", prompt},
                {"concept", concept_name},
                {"comment_id", comment_id},
                {"iteration", iteration},
                {"params_fp", params_fp}};
    }

    static RequestKey from_json(const nlohmann::json& j) {
        RequestKey k;
        k.prompt = j.at("prompt").get<std::string>();
        k.concept_name = j.at("concept").get<std::string>();
        k.comment_id = j.at("comment_id").get<std::string>();
        k.iteration = j.at("iteration").get<int>();
        k.params_fp = j.at("params_fp").get<std::string>();
        return k;
    }
};

struct AnnotationRequest {
    RenderedPrompt rendered;
    RequestParams params;
    int iteration = 0;

    RequestKey key() const {
        return RequestKey{std::string(prompt_name(rendered.prompt_id)),
                          std::string(concept_name(rendered.target)), rendered.comment_id,
                          iteration, params.fingerprint()};
    }
};

enum class BackendKind { Live, Replay };

struct RawResponse {
    RequestKey key;
    std::string text;  // byte-exact, line breaks preserved
    long latency_ms = 0;
    BackendKind backend = BackendKind::Replay;
};

struct GatewayError {
    enum class Kind { Transport, HttpStatus, RateLimited, CacheMiss, MissingCredential };
    Kind kind{};
    int status = 0;
    std::string detail;
    long retry_after_ms = 0;
};

inline std::string_view gateway_error_name(GatewayError::Kind k) {
    switch (k) {
        case GatewayError::Kind::Transport: return "transport";
        case GatewayError::Kind::HttpStatus: return "http_status";
        case GatewayError::Kind::RateLimited: return "rate_limited";
        case GatewayError::Kind::CacheMiss: return "cache_miss";
        case GatewayError::Kind::MissingCredential: return "missing_credential";
    }
    return "";
}

using AnnotateResult = std::variant<RawResponse, GatewayError>;

inline bool is_ok(const AnnotateResult& r) { return std::holds_alternative<RawResponse>(r); }

// ---------------------------------------------------------------------------
// Cassette store
// ---------------------------------------------------------------------------

struct CassetteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Append-only JSONL store of recorded responses keyed by
// (prompt, concept, comment, iteration, params fingerprint).
class CassetteStore {
public:
    enum class Mode { ReadOnly, Append };

    CassetteStore(const std::filesystem::path& path, Mode mode) : path_(path), mode_(mode) {
        std::ifstream in(path);
        if (!in && mode == Mode::ReadOnly)
            throw CassetteError("cassette not found: " + path.string());
        if (in) {
            std::string line;
            size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (trim_view(line).empty()) continue;
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(line);
                    RequestKey key = RequestKey::from_json(j.at("key"));
                    entries_[key.cache_key()] = j.at("text").get<std::string>();
                } catch (const nlohmann::json::exception& e) {
                    throw CassetteError("cassette " + path.string() + " line " +
                                        std::to_string(line_no) + ": " + e.what());
                }
            }
        }
        if (mode == Mode::Append) {
            out_.open(path, std::ios::app);
            if (!out_) throw CassetteError("cassette not writable: " + path.string());
        }
    }

    std::optional<std::string> lookup(const RequestKey& key) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find(key.cache_key());
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void append(const RequestKey& key, const std::string& text) {
        std::lock_guard lock(mu_);
        if (mode_ != Mode::Append) throw CassetteError("cassette opened read-only");
        nlohmann::json j{{"key", key.to_json()}, {"text", text}, {"ts", iso8601_now()}};
        out_ << j.dump() << '\n';
        out_.flush();
        if (!out_) throw CassetteError("cassette write failed: " + path_.string());
        entries_[key.cache_key()] = text;
    }

    size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

private:
    std::filesystem::path path_;
    Mode mode_;
    std::unordered_map<std::string, std::string> entries_;
    std::ofstream out_;
    mutable std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

enum class MessageLayout { SeparateTurns, Inline };

struct LiveConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;  // empty -> resolved from HOT_API_KEY
    MessageLayout layout = MessageLayout::SeparateTurns;
    int timeout_seconds = 60;

    std::string resolved_key() const {
        if (!api_key.empty()) return api_key;
        const char* env = std::getenv("HOT_API_KEY");
        return env ? env : "";
    }
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual AnnotateResult annotate(const AnnotationRequest& req) = 0;
};

class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const CassetteStore& cassette) : cassette_(cassette) {}

    AnnotateResult annotate(const AnnotationRequest& req) override {
        RequestKey key = req.key();
        auto text = cassette_.lookup(key);
        if (!text)
            return GatewayError{GatewayError::Kind::CacheMiss, 0,
                                "no cassette entry for " + key.cache_key(), 0};
        return RawResponse{std::move(key), std::move(*text), 0, BackendKind::Replay};
    }

private:
    const CassetteStore& cassette_;
};

namespace detail {

inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    // "http://host:port/v1" -> ("http://host:port", "/v1")
    size_t scheme = base_url.find("://");
    size_t path_start = scheme == std::string::npos ? base_url.find('/')
                                                    : base_url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

inline nlohmann::json build_chat_body(const AnnotationRequest& req, MessageLayout layout) {
    nlohmann::json messages = nlohmann::json::array();
    if (layout == MessageLayout::SeparateTurns) {
        messages.push_back({{"role", "system"}, {"content", req.rendered.instruction_text}});
        messages.push_back({{"role", "user"}, {"content", req.rendered.comment_text}});
    } else {
        messages.push_back(
            {{"role", "user"},
             {"content", req.rendered.instruction_text + "\n\nComment: " + req.rendered.comment_text}});
    }
    nlohmann::json body{{"model", req.params.model},
                        {"messages", messages},
                        {"temperature", req.params.temperature},
                        {"top_p", req.params.top_p},
                        {"presence_penalty", req.params.presence_penalty},
                        {"frequency_penalty", req.params.frequency_penalty}};
    if (req.params.max_tokens) body["max_tokens"] = *req.params.max_tokens;
    return body;
}

}  // namespace detail

// OpenAI-compatible chat-completions client. When a recording cassette is
// attached, every successful response is appended to it.
class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveConfig config, CassetteStore* record_to = nullptr)
        : config_(std::move(config)), record_to_(record_to) {}

    AnnotateResult annotate(const AnnotationRequest& req) override {
        const std::string key_value = config_.resolved_key();
        if (key_value.empty())
            return GatewayError{GatewayError::Kind::MissingCredential, 0,
                                "no API key (set HOT_API_KEY)", 0};

        auto [host, prefix] = detail::split_base_url(config_.base_url);
        httplib::Client client(host);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers{{"Authorization", "Bearer " + key_value}};

        const std::string body = detail::build_chat_body(req, config_.layout).dump();
        auto start = std::chrono::steady_clock::now();
        httplib::Result res = client.Post(prefix + "/chat/completions", headers, body,
                                          "application/json");
        long latency = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                             std::chrono::steady_clock::now() - start)
                                             .count());

        if (!res)
            return GatewayError{GatewayError::Kind::Transport, 0, httplib::to_string(res.error()), 0};
        if (res->status == 429) {
            long retry_ms = 0;
            if (res->has_header("Retry-After"))
                retry_ms = static_cast<long>(
                    std::strtod(res->get_header_value("Retry-After").c_str(), nullptr) * 1000.0);
            return GatewayError{GatewayError::Kind::RateLimited, 429, "rate limited", retry_ms};
        }
        if (res->status < 200 || res->status >= 300)
            return GatewayError{GatewayError::Kind::HttpStatus, res->status,
                                res->body.substr(0, 200), 0};

        std::string content;
        try {
            nlohmann::json j = nlohmann::json::parse(res->body);
            content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            return GatewayError{GatewayError::Kind::Transport, res->status,
                                std::string("malformed completion body: ") + e.what(), 0};
        }

        RawResponse response{req.key(), std::move(content), latency, BackendKind::Live};
        if (record_to_) record_to_->append(response.key, response.text);
        return response;
    }

private:
    LiveConfig config_;
    CassetteStore* record_to_;
};

// ---------------------------------------------------------------------------
// Retry + batch execution
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 3;
    int base_delay_ms = 250;
    int max_delay_ms = 8000;

    // Transport faults, 429 and 5xx are retryable; other 4xx never are.
    bool retryable(const GatewayError& err) const {
        switch (err.kind) {
            case GatewayError::Kind::Transport:
            case GatewayError::Kind::RateLimited: return true;
            case GatewayError::Kind::HttpStatus: return err.status >= 500;
            default: return false;
        }
    }

    long delay_ms(int attempt, const GatewayError& err) const {
        if (err.kind == GatewayError::Kind::RateLimited && err.retry_after_ms > 0)
            return err.retry_after_ms;
        long d = static_cast<long>(base_delay_ms) << attempt;
        return d > max_delay_ms ? max_delay_ms : d;
    }
};

inline AnnotateResult annotate(const AnnotationRequest& req, Backend& backend) {
    return backend.annotate(req);
}

inline AnnotateResult annotate_with_retry(const AnnotationRequest& req, Backend& backend,
                                          const RetryPolicy& policy) {
    AnnotateResult result = backend.annotate(req);
    for (int attempt = 0; attempt + 1 < policy.max_attempts; ++attempt) {
        if (is_ok(result)) return result;
        const auto& err = std::get<GatewayError>(result);
        if (!policy.retryable(err)) return result;
        std::this_thread::sleep_for(std::chrono::milliseconds(policy.delay_ms(attempt, err)));
        result = backend.annotate(req);
    }
    return result;
}

// Runs all requests with up to `concurrency` in flight. Output order equals
// input order regardless of completion order; per-item failures are data.
inline std::vector<AnnotateResult> run_batch(const std::vector<AnnotationRequest>& reqs,
                                             Backend& backend, int concurrency,
                                             const RetryPolicy& policy = {}) {
    if (concurrency < 1) throw std::invalid_argument("run_batch: concurrency must be >= 1");
    std::vector<AnnotateResult> results(reqs.size());
    if (reqs.empty()) return results;

    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;

    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= reqs.size()) return;
            try {
                results[i] = annotate_with_retry(reqs[i], backend, policy);
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    size_t n_threads = std::min(static_cast<size_t>(concurrency), reqs.size());
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

}  // namespace hot
