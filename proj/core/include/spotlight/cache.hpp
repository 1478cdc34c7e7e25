#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace spotlight {

/// Bumped whenever a pipeline change would make cached answers or embeddings stale.
inline constexpr std::string_view kPipelineVersion = "spotlight-pipeline-1";

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

struct CacheStats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;

    double hit_ratio() const noexcept {
        const auto total = hits + misses;
        return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
    }
};

/// Content-addressed JSON store: <root>/<ns>/<key>.json. Writes go through temp-file + rename,
/// so concurrent readers and writers never observe torn entries. A default-constructed cache is
/// disabled (every get misses, put is a no-op).
class ContentCache {
public:
    ContentCache() = default;
    explicit ContentCache(std::filesystem::path root);

    bool enabled() const noexcept { return !root_.empty(); }
    const std::filesystem::path& root() const noexcept { return root_; }

    std::optional<nlohmann::json> get(std::string_view ns, std::string_view key);
    void put(std::string_view ns, std::string_view key, const nlohmann::json& value);

    CacheStats stats() const noexcept { return {hits_.load(), misses_.load()}; }
    void reset_stats() noexcept {
        hits_ = 0;
        misses_ = 0;
    }

private:
    std::filesystem::path path_for(std::string_view ns, std::string_view key) const;

    std::filesystem::path root_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace spotlight
