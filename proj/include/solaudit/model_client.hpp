#pragma once

// Chat-completion client with retry/backoff, bounded-concurrency batching,
// and an offline replay mode backed by canned responses on disk.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "prompts.hpp"

namespace solaudit::model_client {

struct EndpointConfig {
    std::string base_url;  // e.g. http://localhost:8080/v1
    std::string model_name;
    std::string auth_token;  // sent only in the Authorization header
    double timeout_seconds = 60.0;
    std::size_t max_retries = 3;
    std::size_t backoff_base_ms = 1000;  // doubles per retry
};

struct ResponseRecord {
    std::string sample_id;
    std::string template_name;
    std::string raw_text;  // assistant content, verbatim
    std::int64_t latency_ms = 0;
    std::size_t attempt_count = 0;
    std::optional<std::string> error;  // set by run_batch on per-item failure
};

struct EndpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RequestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Splits "http://host:port/prefix" into client target and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

}  // namespace detail

inline nlohmann::ordered_json request_body(const EndpointConfig& config,
                                           const prompts::RenderedPrompt& prompt) {
    nlohmann::ordered_json body;
    body["model"] = config.model_name;
    body["messages"] = nlohmann::ordered_json::array();
    for (const auto& msg : prompt.messages) {
        body["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    return body;
}

inline ResponseRecord complete(const EndpointConfig& config,
                               const prompts::RenderedPrompt& prompt) {
    auto [host, prefix] = detail::split_base_url(config.base_url);
    httplib::Client client(host);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<std::int64_t>(config.timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<std::int64_t>(config.timeout_seconds * 1000)));

    httplib::Headers headers;
    if (!config.auth_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config.auth_token);
    }

    const std::string body = request_body(config, prompt).dump();
    const auto started = std::chrono::steady_clock::now();

    std::size_t attempt = 0;
    std::string last_failure;
    while (attempt <= config.max_retries) {
        ++attempt;
        auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");

        bool transient = !res || res->status >= 500;
        if (transient) {
            last_failure = res ? "HTTP " + std::to_string(res->status)
                               : "transport failure: " + httplib::to_string(res.error());
            if (attempt <= config.max_retries) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config.backoff_base_ms << (attempt - 1)));
            }
            continue;
        }
        if (res->status >= 400) {
            throw RequestError("HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
        }

        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed response JSON: ") + e.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
            parsed["choices"].empty()) {
            throw ProtocolError("response has no choices");
        }
        const auto& message = parsed["choices"][0].at("message");

        ResponseRecord record;
        record.sample_id = prompt.sample_id;
        record.template_name = prompt.template_name;
        record.raw_text = message.at("content").get<std::string>();
        record.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
        record.attempt_count = attempt;
        return record;
    }
    throw EndpointError("retries exhausted after " + std::to_string(attempt) +
                        " attempts; last failure: " + last_failure);
}

// Bounded concurrency; output order always matches input order.
inline std::vector<ResponseRecord> run_batch(const EndpointConfig& config,
                                             const std::vector<prompts::RenderedPrompt>& batch,
                                             std::size_t concurrency_limit) {
    if (concurrency_limit < 1) throw std::invalid_argument("concurrency_limit must be >= 1");

    std::vector<ResponseRecord> results(batch.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= batch.size()) return;
            try {
                results[idx] = complete(config, batch[idx]);
            } catch (const std::exception& e) {
                ResponseRecord failed;
                failed.sample_id = batch[idx].sample_id;
                failed.template_name = batch[idx].template_name;
                failed.error = e.what();
                results[idx] = std::move(failed);
            }
        }
    };

    std::vector<std::thread> threads;
    const std::size_t n_threads = std::min(concurrency_limit, batch.size());
    threads.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return results;
}

// ---------------------------------------------------------------------------
// Replay mode: responses keyed by sample id under a directory, so evaluation
// runs with no network and no model.

inline ResponseRecord replay_one(const std::filesystem::path& replay_dir,
                                 const prompts::RenderedPrompt& prompt) {
    ResponseRecord record;
    record.sample_id = prompt.sample_id;
    record.template_name = prompt.template_name;
    record.attempt_count = 1;

    auto path = replay_dir / (prompt.sample_id + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        record.error = "no canned response for sample " + prompt.sample_id;
        return record;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    record.raw_text = buf.str();
    return record;
}

inline std::vector<ResponseRecord> run_replay(const std::filesystem::path& replay_dir,
                                              const std::vector<prompts::RenderedPrompt>& batch) {
    std::vector<ResponseRecord> results;
    results.reserve(batch.size());
    for (const auto& prompt : batch) results.push_back(replay_one(replay_dir, prompt));
    return results;
}

// ---------------------------------------------------------------------------
// JSONL persistence. Latency is excluded so replay output is run-stable.

inline nlohmann::ordered_json response_to_json(const ResponseRecord& record) {
    nlohmann::ordered_json j;
    j["sample_id"] = record.sample_id;
    j["template"] = record.template_name;
    j["raw_text"] = record.raw_text;
    j["attempt_count"] = record.attempt_count;
    if (record.error) j["error"] = *record.error;
    return j;
}

inline ResponseRecord response_from_json(const nlohmann::json& j) {
    ResponseRecord record;
    record.sample_id = j.at("sample_id").get<std::string>();
    record.template_name = j.at("template").get<std::string>();
    record.raw_text = j.at("raw_text").get<std::string>();
    record.attempt_count = j.value("attempt_count", std::size_t{0});
    if (j.contains("error")) record.error = j["error"].get<std::string>();
    return record;
}

}  // namespace solaudit::model_client
