#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotlight/answerer.hpp"
#include "spotlight/grid.hpp"
#include "spotlight/image.hpp"

namespace spotlight {

/// Question text embedded by build_prompt / build_ocr_prompt; empty if the prompt has none.
std::string question_from_prompt(std::string_view prompt);

/// Canned-reply MLLM. Reply file schema:
///   {"replies":     {"<sha256 of prompt>": "reply", ...},
///    "by_question": {"<question text>": "reply", ...},
///    "default":     "reply",                 // optional, else empty reply
///    "logits":      {"<outcome>": z, ...}}   // optional: constant logits => probability mode
/// Lookup order: prompt hash, then question text. backend_id embeds a hash of the map so edits
/// invalidate cached answers.
class MockMllmBackend final : public MllmBackend {
public:
    explicit MockMllmBackend(const nlohmann::json& spec, std::string model_id = "mock");
    static MockMllmBackend from_file(const std::filesystem::path& path);

    const MllmDescriptor& descriptor() const override { return descriptor_; }
    MllmReply complete(const MllmRequest& request) override;

    std::uint64_t calls() const noexcept { return calls_.load(); }

private:
    MllmDescriptor descriptor_;
    std::map<std::string, std::string> by_hash_;
    std::map<std::string, std::string> by_question_;
    std::optional<std::string> default_reply_;
    std::optional<std::map<std::string, double>> logits_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Directional oracle: answers a question correctly iff, in some sent image matching the
/// reference page's size, the mean blue channel over the gold cell exceeds the reference page's
/// by more than `threshold` units. Otherwise it replies "Information not available.".
class UpliftOracleMllm final : public MllmBackend {
public:
    struct Entry {
        std::string question;
        std::string answer;
        PageImage reference;
        PatchRect cell;
    };

    explicit UpliftOracleMllm(std::vector<Entry> entries, double threshold = 20.0);

    /// JSON: {"threshold": 20, "entries": [{"question","answer","page","cell":[x0,y0,x1,y1]}]},
    /// page paths relative to `base_dir`.
    static UpliftOracleMllm from_json(const nlohmann::json& spec, const std::filesystem::path& base_dir);

    const MllmDescriptor& descriptor() const override { return descriptor_; }
    MllmReply complete(const MllmRequest& request) override;

    /// Mean blue-channel difference over `cell` (image minus reference).
    static double blue_uplift(const PageImage& image, const PageImage& reference, const PatchRect& cell);

private:
    MllmDescriptor descriptor_;
    std::map<std::string, Entry> entries_;
    double threshold_;
};

/// Probability-mode mock for occlusion analysis: P(reference) = base - drop * (fraction of the
/// region's pixels that differ from the reference page). Replies with logits {answer: ln P,
/// "<other>": ln(1-P)} so the softmax recovers P exactly.
class RegionSensitiveMllm final : public MllmBackend {
public:
    RegionSensitiveMllm(PageImage reference, PatchRect region, std::string answer, double base = 0.9,
                        double drop = 0.5);

    const MllmDescriptor& descriptor() const override { return descriptor_; }
    MllmReply complete(const MllmRequest& request) override;

    double probability_for(const PageImage& image) const;

private:
    MllmDescriptor descriptor_;
    PageImage reference_;
    PatchRect region_;
    std::string answer_;
    double base_;
    double drop_;
};

}  // namespace spotlight
