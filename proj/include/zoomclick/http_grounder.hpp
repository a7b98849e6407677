#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <semaphore>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>

#include <httplib.h>
#include <json.hpp>

#include "zoomclick/grounder.hpp"
#include "zoomclick/image_io.hpp"
#include "zoomclick/prompts.hpp"
#include "zoomclick/rng.hpp"

namespace zoomclick {

/// Which response format the endpoint's model speaks.
enum class PromptProtocol { BboxText, ToolCall };

inline const char* to_string(PromptProtocol p)
{
    return p == PromptProtocol::BboxText ? "bbox-text" : "tool-call";
}

inline PromptProtocol protocol_from_string(const std::string& s)
{
    if (s == "bbox-text") return PromptProtocol::BboxText;
    if (s == "tool-call") return PromptProtocol::ToolCall;
    throw std::invalid_argument("unknown prompt protocol: " + s);
}

/// Connection settings for a chat-completion style inference endpoint.
/// The auth token is taken from `auth_env` unless `auth_token` is set
/// explicitly; requests go to <base_url>/chat/completions.
struct EndpointConfig {
    std::string base_url; // e.g. http://localhost:8000/v1
    std::string model;
    PromptProtocol protocol = PromptProtocol::BboxText;
    double timeout_s = 120.0;
    int retries = 2;
    std::string auth_env = "ZOOMCLICK_API_TOKEN";
    std::string auth_token; // optional; overrides auth_env
    int max_inflight = 4;
    // Optional template overrides (paths); empty uses the built-ins.
    std::string bbox_template_path;
    std::string toolcall_system_path;
    std::string toolcall_user_path;

    void validate() const
    {
        if (base_url.empty()) {
            throw std::invalid_argument("EndpointConfig: base_url required");
        }
        if (model.empty()) {
            throw std::invalid_argument("EndpointConfig: model required");
        }
        if (timeout_s <= 0.0) {
            throw std::invalid_argument("EndpointConfig: timeout must be > 0");
        }
        if (retries < 0) {
            throw std::invalid_argument("EndpointConfig: retries must be >= 0");
        }
        if (max_inflight < 1) {
            throw std::invalid_argument("EndpointConfig: max_inflight must be >= 1");
        }
    }
};

/// Raised when the endpoint rejects our credentials; names the env var the
/// operator needs to set.
class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string base64_encode(const std::string& bytes)
{
    static constexpr char kTable[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
            (static_cast<unsigned char>(bytes[i + 1]) << 8) |
            static_cast<unsigned char>(bytes[i + 2]);
        out += kTable[(v >> 18) & 63];
        out += kTable[(v >> 12) & 63];
        out += kTable[(v >> 6) & 63];
        out += kTable[v & 63];
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        const uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
        out += kTable[(v >> 18) & 63];
        out += kTable[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
            (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += kTable[(v >> 18) & 63];
        out += kTable[(v >> 12) & 63];
        out += kTable[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

// Splits "http://host:port/v1" into the client origin and the path prefix.
inline std::pair<std::string, std::string> split_base_url(
    const std::string& base_url)
{
    const size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw std::invalid_argument("base_url needs a scheme: " + base_url);
    }
    const size_t slash = base_url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {base_url, ""};
    }
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, slash), prefix};
}

} // namespace detail

/// Grounding backend for remote vision endpoints. Each call crops the
/// queried view out of the original screenshot, ships it losslessly as a
/// data-URL PNG with the protocol's prompt, and parses the reply into an
/// outcome. Transport failures are retried with exponential backoff and
/// jitter; unparseable model text is a ParseFailure and is never retried.
class HttpGrounder final : public Grounder {
public:
    explicit HttpGrounder(EndpointConfig config)
        : config_(std::move(config)),
          inflight_(config_.max_inflight)
    {
        config_.validate();
        std::tie(origin_, path_prefix_) =
            detail::split_base_url(config_.base_url);
        bbox_template_ = config_.bbox_template_path.empty()
            ? kBboxPromptTemplate
            : load_text_file(config_.bbox_template_path);
        toolcall_system_ = config_.toolcall_system_path.empty()
            ? kToolcallSystemPrompt
            : load_text_file(config_.toolcall_system_path);
        toolcall_user_ = config_.toolcall_user_path.empty()
            ? kToolcallUserTemplate
            : load_text_file(config_.toolcall_user_path);
    }

    const EndpointConfig& config() const { return config_; }
    const std::string& bbox_template() const { return bbox_template_; }
    const std::string& toolcall_system() const { return toolcall_system_; }
    const std::string& toolcall_user() const { return toolcall_user_; }

    /// Debug sink for request/response bodies (image payloads elided).
    void set_debug_log(std::function<void(const std::string&)> sink)
    {
        debug_log_ = std::move(sink);
    }

    std::string name() const override
    {
        return std::string("http-") + to_string(config_.protocol);
    }

    /// Stable identity for config hashing: endpoint, model, protocol and the
    /// exact prompt templates in use.
    std::string identity() const
    {
        nlohmann::json j{{"base_url", config_.base_url},
                         {"model", config_.model},
                         {"protocol", to_string(config_.protocol)},
                         {"prompt_hash", prompt_hash()}};
        return j.dump();
    }

    std::string prompt_hash() const
    {
        uint64_t h = fnv1a(bbox_template_);
        h = fnv1a(toolcall_system_, h);
        h = fnv1a(toolcall_user_, h);
        std::ostringstream oss;
        oss << std::hex << h;
        return oss.str();
    }

    GroundingOutcome ground(const GroundingQuery& query) override
    {
        if (!query.image || !query.image->has_pixels()) {
            throw std::runtime_error(
                "http grounder: sample has no pixel data to send");
        }
        const Image crop = query.image->crop(query.view);
        const std::string png = encode_png(crop);
        const std::string body = request_body(query.instruction, png);

        inflight_.acquire();
        struct Release {
            std::counting_semaphore<>& s;
            ~Release() { s.release(); }
        } release{inflight_};

        debug(query, "request", body, png.size());
        std::string last_error;
        for (int attempt = 0; attempt <= config_.retries; ++attempt) {
            if (attempt > 0) {
                backoff(attempt);
            }
            auto reply = post(body);
            if (!reply) {
                last_error = "connection failed";
                continue;
            }
            if (reply->status == 401 || reply->status == 403) {
                throw AuthError(
                    "endpoint rejected credentials (HTTP " +
                    std::to_string(reply->status) + "); set the " +
                    config_.auth_env + " environment variable");
            }
            if (reply->status == 429 || reply->status >= 500) {
                last_error = "HTTP " + std::to_string(reply->status);
                continue;
            }
            if (reply->status != 200) {
                return GroundingOutcome::transport_error(
                    "HTTP " + std::to_string(reply->status));
            }
            debug(query, "response", reply->body, 0);
            return parse_reply(reply->body, query);
        }
        return GroundingOutcome::transport_error(
            last_error + " after " + std::to_string(config_.retries + 1) +
            " attempt(s)");
    }

private:
    std::string auth_header() const
    {
        if (!config_.auth_token.empty()) return config_.auth_token;
        const char* tok = std::getenv(config_.auth_env.c_str());
        return tok ? tok : "";
    }

    std::string request_body(const std::string& instruction,
                             const std::string& png) const
    {
        nlohmann::json image_part{
            {"type", "image_url"},
            {"image_url",
             {{"url",
               "data:image/png;base64," + detail::base64_encode(png)}}}};
        nlohmann::json messages = nlohmann::json::array();
        if (config_.protocol == PromptProtocol::ToolCall) {
            messages.push_back(
                {{"role", "system"}, {"content", toolcall_system_}});
            messages.push_back(
                {{"role", "user"},
                 {"content",
                  nlohmann::json::array(
                      {image_part,
                       {{"type", "text"},
                        {"text",
                         render_prompt(toolcall_user_, instruction)}}})}});
        } else {
            messages.push_back(
                {{"role", "user"},
                 {"content",
                  nlohmann::json::array(
                      {image_part,
                       {{"type", "text"},
                        {"text",
                         render_prompt(bbox_template_, instruction)}}})}});
        }
        nlohmann::json body{{"model", config_.model},
                            {"messages", messages},
                            {"temperature", 0.0}};
        return body.dump();
    }

    std::optional<httplib::Response> post(const std::string& body)
    {
        httplib::Client client(origin_);
        const auto timeout =
            std::chrono::milliseconds(static_cast<long>(config_.timeout_s * 1000));
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        const std::string token = auth_header();
        if (!token.empty()) {
            headers.emplace("Authorization", "Bearer " + token);
        }
        auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               body, "application/json");
        if (!res) return std::nullopt;
        return *res;
    }

    GroundingOutcome parse_reply(const std::string& body,
                                 const GroundingQuery& query) const
    {
        const auto j =
            nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.contains("choices") ||
            !j["choices"].is_array() || j["choices"].empty()) {
            return GroundingOutcome::parse_failure(body);
        }
        const auto& msg = j["choices"][0];
        if (!msg.contains("message") || !msg["message"].contains("content") ||
            !msg["message"]["content"].is_string()) {
            return GroundingOutcome::parse_failure(body);
        }
        const std::string content = msg["message"]["content"].get<std::string>();
        return config_.protocol == PromptProtocol::ToolCall
            ? parse_toolcall_response(content, query.crop_width(),
                                      query.crop_height())
            : parse_bbox_response(content, query.crop_width(),
                                  query.crop_height());
    }

    void backoff(int attempt)
    {
        thread_local SplitMix64 jitter(
            static_cast<uint64_t>(
                std::chrono::steady_clock::now().time_since_epoch().count()) ^
            std::hash<std::thread::id>{}(std::this_thread::get_id()));
        const double base = 0.5 * static_cast<double>(1 << (attempt - 1));
        const double sleep_s = base + jitter.uniform() * 0.25;
        std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
    }

    void debug(const GroundingQuery& query, const char* what,
               const std::string& body, size_t png_bytes) const
    {
        if (!debug_log_) return;
        std::string shown = body;
        const size_t at = shown.find("data:image/png;base64,");
        if (at != std::string::npos) {
            const size_t end = shown.find('"', at);
            shown.replace(at, (end == std::string::npos ? shown.size() : end) - at,
                          "<png:" + std::to_string(png_bytes) + " bytes>");
        }
        debug_log_("[" + query.sample_id + " r" +
                   std::to_string(query.round_index) + "] " + what + ": " +
                   shown);
    }

    EndpointConfig config_;
    std::string origin_;
    std::string path_prefix_;
    std::string bbox_template_;
    std::string toolcall_system_;
    std::string toolcall_user_;
    std::counting_semaphore<> inflight_;
    std::function<void(const std::string&)> debug_log_;
};

} // namespace zoomclick
