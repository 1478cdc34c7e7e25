#include "spotlight/cache.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <fstream>

#include "spotlight/error.hpp"
#include "spotlight/image.hpp"

namespace spotlight {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int k = 0; k < len; ++k) {
        out.push_back(kHex[digest[k] >> 4]);
        out.push_back(kHex[digest[k] & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

ContentCache::ContentCache(std::filesystem::path root) : root_(std::move(root)) {
    if (!root_.empty()) std::filesystem::create_directories(root_);
}

std::filesystem::path ContentCache::path_for(std::string_view ns, std::string_view key) const {
    return root_ / std::string(ns) / (std::string(key) + ".json");
}

std::optional<nlohmann::json> ContentCache::get(std::string_view ns, std::string_view key) {
    if (!enabled()) {
        ++misses_;
        return std::nullopt;
    }
    std::ifstream in(path_for(ns, key));
    if (!in) {
        ++misses_;
        return std::nullopt;
    }
    auto value = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) {
        ++misses_;
        return std::nullopt;
    }
    ++hits_;
    return value;
}

void ContentCache::put(std::string_view ns, std::string_view key, const nlohmann::json& value) {
    if (!enabled()) return;
    write_file_atomic(path_for(ns, key), value.dump());
}

}  // namespace spotlight
