#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "spotlight/http_backends.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "spotlight/cache.hpp"
#include "spotlight/error.hpp"

namespace spotlight {

using nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("URL must include a scheme: '" + url + "'");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme '" + scheme + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

namespace {

httplib::Client make_client(const std::string& origin, std::chrono::seconds timeout, const std::string& token) {
    httplib::Client cli(origin);
    cli.set_connection_timeout(std::chrono::seconds(10));
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    if (!token.empty()) cli.set_bearer_token_auth(token);
    return cli;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEmbeddingOptions options)
    : options_(std::move(options)),
      descriptor_{options_.backend_id, options_.dim, BackendKind::http} {
    if (options_.dim == 0) throw ConfigError("http embedding backend needs a positive dim");
    if (options_.backend_id.empty()) throw ConfigError("http embedding backend needs a backend_id");
    std::tie(origin_, prefix_) = split_url(options_.url);
}

HttpEmbeddingBackend::~HttpEmbeddingBackend() = default;

std::vector<EmbeddingVector> HttpEmbeddingBackend::post(const std::string& endpoint, const std::string& body,
                                                        std::size_t expected) {
    const int attempts = std::max(1, options_.retry.attempts);
    auto backoff = options_.retry.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto cli = make_client(origin_, options_.timeout, options_.auth_token);
        auto res = cli.Post(prefix_ + endpoint, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
        } else if (res->status != 200) {
            throw ContractError("embedding backend '" + descriptor_.backend_id + "' answered HTTP " +
                                std::to_string(res->status) + " on " + endpoint);
        } else {
            const auto doc = json::parse(res->body, nullptr, false);
            if (doc.is_discarded() || !doc.contains("embeddings") || !doc["embeddings"].is_array()) {
                throw ContractError("embedding backend '" + descriptor_.backend_id + "' sent a malformed body");
            }
            if (doc.contains("dim") && doc["dim"].get<std::size_t>() != descriptor_.dim) {
                throw ContractError("embedding backend '" + descriptor_.backend_id + "' reports dim " +
                                    std::to_string(doc["dim"].get<std::size_t>()) + ", expected " +
                                    std::to_string(descriptor_.dim));
            }
            const auto& rows = doc["embeddings"];
            if (rows.size() != expected) {
                throw ContractError("embedding backend '" + descriptor_.backend_id + "' returned " +
                                    std::to_string(rows.size()) + " rows for " + std::to_string(expected) + " inputs");
            }
            std::vector<EmbeddingVector> out;
            out.reserve(rows.size());
            for (const auto& row : rows) {
                if (!row.is_array()) throw ContractError("embedding row is not an array");
                out.push_back(checked_embedding(row.get<std::vector<double>>(), descriptor_.dim, descriptor_.backend_id));
            }
            return out;
        }
        if (attempt < attempts) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * options_.retry.multiplier));
        }
    }
    throw BackendError("embedding backend '" + descriptor_.backend_id + "' failed after " + std::to_string(attempts) +
                           " attempt(s): " + last_error,
                       attempts);
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_texts(std::span<const std::string> texts) {
    if (texts.empty()) return {};
    json body{{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    return post("/embed_text", body.dump(), texts.size());
}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed_images(std::span<const PageImage> images) {
    if (images.empty()) return {};
    json arr = json::array();
    for (const auto& img : images) arr.push_back(base64_encode(encode_png(img)));
    json body{{"images_b64", std::move(arr)}};
    return post("/embed_image", body.dump(), images.size());
}

MllmProvider parse_provider(const std::string& s) {
    if (s == "openai" || s == "openai_chat") return MllmProvider::openai_chat;
    if (s == "generic") return MllmProvider::generic;
    throw ConfigError("unknown MLLM provider '" + s + "' (expected openai or generic)");
}

struct HttpMllmBackend::Limiter {
    explicit Limiter(int n) : free(std::max(1, n)) {}

    void acquire() {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return free > 0; });
        --free;
    }
    void release() {
        {
            std::lock_guard lock(mu);
            ++free;
        }
        cv.notify_one();
    }

    std::mutex mu;
    std::condition_variable cv;
    int free;
};

HttpMllmBackend::HttpMllmBackend(HttpMllmOptions options)
    : options_(std::move(options)), limiter_(std::make_unique<Limiter>(options_.max_concurrent)) {
    if (options_.model_id.empty()) throw ConfigError("http MLLM backend needs a model_id");
    std::tie(origin_, prefix_) = split_url(options_.url);
    if (options_.path.empty()) {
        options_.path = options_.provider == MllmProvider::openai_chat ? "/v1/chat/completions" : "/generate";
    }
    descriptor_.backend_id = "http:" + origin_ + prefix_ + options_.path;
    descriptor_.model_id = options_.model_id;
    descriptor_.supports_logits = options_.supports_logits && options_.provider == MllmProvider::generic;
}

HttpMllmBackend::~HttpMllmBackend() = default;

std::string HttpMllmBackend::encode_request(const MllmRequest& request) const {
    const std::string model = request.model_id.empty() ? options_.model_id : request.model_id;
    if (options_.provider == MllmProvider::openai_chat) {
        json content = json::array();
        content.push_back({{"type", "text"}, {"text", request.prompt}});
        for (const auto& img : request.images) {
            const char* mime = sniff_format(img) == ImageFormat::jpeg ? "image/jpeg" : "image/png";
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", std::string("data:") + mime + ";base64," + base64_encode(img)}}}});
        }
        json body{{"model", model},
                  {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})},
                  {"max_tokens", request.max_tokens},
                  {"temperature", request.temperature}};
        return body.dump();
    }
    json images = json::array();
    for (const auto& img : request.images) images.push_back(base64_encode(img));
    json body{{"model_id", model},
              {"prompt", request.prompt},
              {"images_b64", std::move(images)},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"want_logits", request.want_logits}};
    return body.dump();
}

MllmReply HttpMllmBackend::decode_response(const std::string& body) const {
    const auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ContractError("MLLM backend sent a non-JSON body");
    MllmReply reply;
    if (options_.provider == MllmProvider::openai_chat) {
        if (!doc.contains("choices") || !doc["choices"].is_array()) {
            throw ContractError("MLLM response has no choices array");
        }
        if (!doc["choices"].empty()) {
            const auto& msg = doc["choices"][0].value("message", json::object());
            if (msg.contains("content") && msg["content"].is_string()) reply.text = msg["content"].get<std::string>();
        }
        if (doc.contains("usage") && doc["usage"].is_object()) {
            reply.usage = TokenUsage{doc["usage"].value("prompt_tokens", 0), doc["usage"].value("completion_tokens", 0)};
        }
        return reply;
    }
    reply.text = doc.value("text", std::string{});
    if (doc.contains("usage") && doc["usage"].is_object()) {
        reply.usage = TokenUsage{doc["usage"].value("prompt_tokens", 0), doc["usage"].value("completion_tokens", 0)};
    }
    if (doc.contains("logits") && doc["logits"].is_object()) {
        reply.logits = doc["logits"].get<std::map<std::string, double>>();
    }
    return reply;
}

MllmReply HttpMllmBackend::complete(const MllmRequest& request) {
    const std::string body = encode_request(request);
    limiter_->acquire();
    struct Release {
        Limiter& l;
        ~Release() { l.release(); }
    } release{*limiter_};

    auto cli = make_client(origin_, options_.timeout, options_.auth_token);
    auto res = cli.Post(prefix_ + options_.path, body, "application/json");
    if (!res) throw BackendError("transport error: " + httplib::to_string(res.error()));
    if (retryable_status(res->status)) throw BackendError("HTTP " + std::to_string(res->status));
    if (res->status != 200) {
        throw ContractError("MLLM backend answered HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    return decode_response(res->body);
}

}  // namespace spotlight
