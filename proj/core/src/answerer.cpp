#include "spotlight/answerer.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <thread>

#include "spotlight/cache.hpp"
#include "spotlight/error.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

std::string_view to_string(PromptMode mode) noexcept {
    switch (mode) {
        case PromptMode::baseline:
            return "baseline";
        case PromptMode::spotlight:
            return "spotlight";
        case PromptMode::cot:
            return "cot";
    }
    return "baseline";
}

PromptMode parse_prompt_mode(std::string_view s) {
    if (s == "baseline") return PromptMode::baseline;
    if (s == "spotlight") return PromptMode::spotlight;
    if (s == "cot") return PromptMode::cot;
    throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

namespace {

constexpr std::string_view kTaskLine = "Read the above Images and answer this question: ";

constexpr std::string_view kInstructions =
    "Instructions:\n"
    "- DO NOT use external knowledge.\n"
    "- Provide a one-word or numerical answer if possible.\n"
    "- If information is unavailable, state \"Information not available.\"";

constexpr std::string_view kHighlightDirective =
    "Focus on the BLUE Highlighted area in images as it is more relevant to the query. "
    "First, try to answer only using the highlighted area, and if not found, then, consider whole image";

// Stand-in chain-of-thought suffix; the final line marker is what extract_cot_answer keys on.
constexpr std::string_view kCotSuffix =
    "Think through the question step by step, describing what you see in the images. "
    "Then give your final answer on the last line in the form:\n"
    "Answer: <answer>";

}  // namespace

std::string build_prompt(std::string_view question, PromptMode mode) {
    std::string p;
    p.append(kTaskLine).append(text::trim(question)).append("\n\n");
    if (mode == PromptMode::spotlight) p.append(kHighlightDirective).append("\n\n");
    p.append(kInstructions);
    if (mode == PromptMode::cot) p.append("\n\n").append(kCotSuffix);
    return p;
}

std::string build_ocr_prompt(std::string_view question, std::string_view ocr_text) {
    std::string p = "Document text (extracted by OCR):\n";
    p.append(ocr_text);
    if (!p.ends_with('\n')) p.push_back('\n');
    p.append("\nRead the above text and answer this question: ").append(text::trim(question)).append("\n\n");
    p.append(kInstructions);
    return p;
}

std::string answer_cache_key(const MllmDescriptor& backend, const MllmRequest& request) {
    nlohmann::json key;
    key["pipeline"] = kPipelineVersion;
    key["backend_id"] = backend.backend_id;
    key["model_id"] = request.model_id.empty() ? backend.model_id : request.model_id;
    key["prompt"] = sha256_hex(request.prompt);
    auto& images = key["images"] = nlohmann::json::array();
    for (const auto& img : request.images) images.push_back(sha256_hex(img));
    key["max_tokens"] = request.max_tokens;
    key["temperature"] = request.temperature;
    key["logits"] = request.want_logits;
    return sha256_hex(key.dump());
}

namespace {

nlohmann::json reply_to_json(const MllmReply& r) {
    nlohmann::json j{{"text", r.text}};
    if (r.usage) j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens}, {"completion_tokens", r.usage->completion_tokens}};
    return j;
}

MllmReply reply_from_json(const nlohmann::json& j) {
    MllmReply r;
    r.text = j.value("text", std::string{});
    if (j.contains("usage")) {
        r.usage = TokenUsage{j["usage"].value("prompt_tokens", 0), j["usage"].value("completion_tokens", 0)};
    }
    return r;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

Answer ask(MllmBackend& backend, const MllmRequest& request, ContentCache* cache, const RetryPolicy& retry) {
    const auto start = std::chrono::steady_clock::now();
    const bool use_cache = cache != nullptr && cache->enabled() && !request.want_logits;
    std::string key;
    if (use_cache) {
        key = answer_cache_key(backend.descriptor(), request);
        if (auto hit = cache->get("answers", key)) {
            MllmReply reply = reply_from_json(*hit);
            Answer a;
            a.raw = std::move(reply.text);
            a.normalized = normalize_answer(a.raw);
            a.usage = reply.usage;
            a.cache_hit = true;
            a.latency_ms = elapsed_ms(start);
            return a;
        }
    }

    const int attempts = std::max(1, retry.attempts);
    auto backoff = retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            MllmReply reply = backend.complete(request);
            if (use_cache) cache->put("answers", key, reply_to_json(reply));
            Answer a;
            a.raw = std::move(reply.text);
            a.normalized = normalize_answer(a.raw);
            a.usage = reply.usage;
            a.attempts = attempt;
            a.latency_ms = elapsed_ms(start);
            return a;
        } catch (const BackendError& e) {
            if (attempt >= attempts) {
                throw BackendError("MLLM backend '" + backend.descriptor().backend_id + "' failed after " +
                                       std::to_string(attempt) + " attempt(s): " + e.what(),
                                   attempt);
            }
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * retry.multiplier)));
        }
    }
}

std::vector<std::string> normalize_answer(std::string_view raw) {
    const std::string lowered = text::to_lower(text::trim(raw));
    if (lowered == kUnanswerableToken) return {std::string(kUnanswerableToken)};
    std::vector<std::string> tokens;
    for (auto& tok : text::split_ws(text::strip_punct(lowered))) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        tokens.push_back(std::move(tok));
    }
    if (tokens == std::vector<std::string>{"information", "not", "available"}) {
        return {std::string(kUnanswerableToken)};
    }
    return tokens;
}

std::string normalize_answer_string(std::string_view raw) { return text::join(normalize_answer(raw)); }

std::string extract_cot_answer(std::string_view reply) {
    static constexpr std::string_view kMarker = "Answer:";
    const auto pos = reply.rfind(kMarker);
    if (pos == std::string_view::npos) return text::trim(reply);
    auto rest = reply.substr(pos + kMarker.size());
    rest = rest.substr(0, rest.find('\n'));
    return text::trim(rest);
}

}  // namespace spotlight
