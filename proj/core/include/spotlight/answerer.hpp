#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spotlight {

class ContentCache;

enum class PromptMode { baseline, spotlight, cot };

std::string_view to_string(PromptMode mode) noexcept;
PromptMode parse_prompt_mode(std::string_view s);

/// Canonical phrase the prompts ask for when the answer is absent.
inline constexpr std::string_view kUnanswerablePhrase = "Information not available.";
/// Token that normalize_answer maps any casing of the phrase to.
inline constexpr std::string_view kUnanswerableToken = "<unanswerable>";

struct MllmRequest {
    std::string prompt;
    std::vector<std::vector<std::uint8_t>> images;  // encoded PNG/JPEG, in send order
    std::string model_id;
    int max_tokens = 256;
    double temperature = 0.0;
    bool want_logits = false;  // probability mode, honoured only by backends that support it
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct MllmReply {
    std::string text;
    std::optional<TokenUsage> usage;
    // Outcome -> logit. Present only in probability mode on backends with logit access.
    std::optional<std::map<std::string, double>> logits;
};

struct MllmDescriptor {
    std::string backend_id;
    std::string model_id;
    bool supports_logits = false;
};

/// Multimodal chat backend. complete() throws BackendError for transport failures (one attempt);
/// retries are the caller's business (see ask()). Implementations must be thread-safe.
class MllmBackend {
public:
    virtual ~MllmBackend() = default;
    virtual const MllmDescriptor& descriptor() const = 0;
    virtual MllmReply complete(const MllmRequest& request) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    double multiplier = 2.0;
};

struct Answer {
    std::string raw;
    std::vector<std::string> normalized;
    double latency_ms = 0.0;
    std::optional<TokenUsage> usage;
    bool cache_hit = false;
    int attempts = 0;
};

/// Prompt text for a question. Byte-stable; golden-file tested.
std::string build_prompt(std::string_view question, PromptMode mode);

/// OCR-baseline prompt: the baseline instructions plus extracted page text instead of images.
std::string build_ocr_prompt(std::string_view question, std::string_view ocr_text);

/// Send a request, consulting/populating `cache` (may be null) keyed by backend id, model id,
/// prompt hash, image hashes, decoding params and pipeline version. Transport failures are retried
/// with exponential backoff; after the last attempt a BackendError carrying the attempt count is thrown.
Answer ask(MllmBackend& backend, const MllmRequest& request, ContentCache* cache = nullptr,
           const RetryPolicy& retry = {});

/// Cache key used by ask(); exposed for tests and tooling.
std::string answer_cache_key(const MllmDescriptor& backend, const MllmRequest& request);

/// SQuAD-style normalization: lowercase, strip punctuation (digit-internal marks kept), drop
/// articles, collapse whitespace. Any casing of "information not available" becomes <unanswerable>.
std::vector<std::string> normalize_answer(std::string_view raw);
std::string normalize_answer_string(std::string_view raw);

/// Text after the last "Answer:" marker; the whole reply when there is none.
std::string extract_cot_answer(std::string_view reply);

}  // namespace spotlight
