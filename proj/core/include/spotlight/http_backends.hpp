#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "spotlight/answerer.hpp"
#include "spotlight/embedding.hpp"

namespace spotlight {

/// Split "http://host:port/prefix" into ("http://host:port", "/prefix"). Throws ConfigError.
std::pair<std::string, std::string> split_url(const std::string& url);

struct HttpEmbeddingOptions {
    std::string url;  // base URL; /embed_text and /embed_image are appended
    std::string backend_id;
    std::size_t dim = 0;
    std::string auth_token;  // sent as "Authorization: Bearer ..." when nonempty
    std::size_t batch = 16;
    std::chrono::seconds timeout{60};
    RetryPolicy retry;
};

/// JSON-over-POST embedding client:
///   POST /embed_text  {"texts": [...]}       -> {"embeddings": [[...], ...], "dim": d}
///   POST /embed_image {"images_b64": [...]}  -> same; images are sent PNG-encoded.
class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(HttpEmbeddingOptions options);
    ~HttpEmbeddingBackend() override;

    const EmbeddingBackendDescriptor& descriptor() const override { return descriptor_; }
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const PageImage> images) override;
    std::size_t max_batch() const override { return options_.batch; }

private:
    std::vector<EmbeddingVector> post(const std::string& endpoint, const std::string& body, std::size_t expected);

    HttpEmbeddingOptions options_;
    EmbeddingBackendDescriptor descriptor_;
    std::string origin_;
    std::string prefix_;
};

enum class MllmProvider { openai_chat, generic };

MllmProvider parse_provider(const std::string& s);

struct HttpMllmOptions {
    std::string url;
    std::string path;  // empty: provider default ("/v1/chat/completions" or "/generate")
    MllmProvider provider = MllmProvider::openai_chat;
    std::string model_id;
    std::string auth_token;
    int max_concurrent = 4;
    std::chrono::seconds timeout{120};
    bool supports_logits = false;  // generic provider may return {"logits": {...}}
};

/// Chat-style multimodal client. One adapter per provider wire format:
///   openai_chat: OpenAI chat-completions with data-URL image parts.
///   generic:     {"model_id","prompt","images_b64","max_tokens","temperature","want_logits"}
///                -> {"text": "...", "logits": {...}?, "usage": {...}?}
/// Single attempt per complete(); retries live in ask().
class HttpMllmBackend final : public MllmBackend {
public:
    explicit HttpMllmBackend(HttpMllmOptions options);
    ~HttpMllmBackend() override;

    const MllmDescriptor& descriptor() const override { return descriptor_; }
    MllmReply complete(const MllmRequest& request) override;

    /// Request body the adapter would send; exposed for wire-format tests.
    std::string encode_request(const MllmRequest& request) const;
    MllmReply decode_response(const std::string& body) const;

private:
    struct Limiter;

    HttpMllmOptions options_;
    MllmDescriptor descriptor_;
    std::string origin_;
    std::string prefix_;
    std::unique_ptr<Limiter> limiter_;
};

}  // namespace spotlight
