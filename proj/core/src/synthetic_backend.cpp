#include "spotlight/synthetic_backend.hpp"

#include <array>

#include "spotlight/text.hpp"

namespace spotlight {

namespace {

constexpr std::array<MarkerColor, 8> kPalette = {{
    {"crimson", {220, 20, 60}},
    {"emerald", {0, 155, 80}},
    {"amber", {255, 191, 0}},
    {"violet", {143, 0, 255}},
    {"teal", {0, 128, 128}},
    {"coral", {255, 111, 81}},
    {"olive", {128, 128, 0}},
    {"indigo", {75, 0, 130}},
}};

constexpr std::size_t kMarkers = kPalette.size();
constexpr std::size_t kDim = 1 + kMarkers + 3;
constexpr double kColorWeight = 0.1;

}  // namespace

std::span<const MarkerColor> synthetic_palette() { return kPalette; }

SyntheticEmbeddingBackend::SyntheticEmbeddingBackend()
    : descriptor_{"synthetic-v1", kDim, BackendKind::synthetic} {}

EmbeddingVector SyntheticEmbeddingBackend::embed_text_features(std::string_view text) {
    std::vector<double> v(kDim, 0.0);
    double hits = 0.0;
    for (const auto& token : text::split_ws(text::strip_punct(text::to_lower(text), true))) {
        for (std::size_t k = 0; k < kMarkers; ++k) {
            if (token == kPalette[k].keyword) {
                v[1 + k] += 1.0;
                hits += 1.0;
            }
        }
    }
    v[0] = hits > 0.0 ? -hits : -1.0;
    return EmbeddingVector(std::move(v));
}

EmbeddingVector SyntheticEmbeddingBackend::embed_image_features(const PageImage& image) {
    std::array<std::size_t, kMarkers> counts{};
    std::array<double, 3> sums{};
    const auto px = image.pixels();
    for (std::size_t o = 0; o < px.size(); o += 3) {
        const Rgb8 c{px[o], px[o + 1], px[o + 2]};
        sums[0] += c.r;
        sums[1] += c.g;
        sums[2] += c.b;
        for (std::size_t k = 0; k < kMarkers; ++k) {
            if (c == kPalette[k].color) {
                ++counts[k];
                break;
            }
        }
    }
    const double total = static_cast<double>(px.size() / 3);
    std::vector<double> v(kDim, 0.0);
    double marker_fraction = 0.0;
    for (std::size_t k = 0; k < kMarkers; ++k) {
        v[1 + k] = static_cast<double>(counts[k]) / total;
        marker_fraction += v[1 + k];
    }
    v[0] = 1.0 - 2.0 * marker_fraction;
    for (std::size_t c = 0; c < 3; ++c) v[1 + kMarkers + c] = kColorWeight * (2.0 * (sums[c] / total) / 255.0 - 1.0);
    return EmbeddingVector(std::move(v));
}

std::vector<EmbeddingVector> SyntheticEmbeddingBackend::embed_texts(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text_features(t));
    return out;
}

std::vector<EmbeddingVector> SyntheticEmbeddingBackend::embed_images(std::span<const PageImage> images) {
    std::vector<EmbeddingVector> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(embed_image_features(img));
    return out;
}

}  // namespace spotlight
