#pragma once

#include <span>
#include <string_view>

#include "spotlight/embedding.hpp"

namespace spotlight {

struct MarkerColor {
    std::string_view keyword;
    Rgb8 color;
};

/// Marker palette: a text token equal to `keyword` lights up the channel that pixels of exactly
/// `color` feed on the image side.
std::span<const MarkerColor> synthetic_palette();

/// Deterministic, controllable encoder for offline tests.
///
/// Image features: [background, marker_1..marker_K, mean_r, mean_g, mean_b] where marker_k is the
/// fraction of pixels matching palette color k, background = 1 - 2 * (total marker fraction) and
/// the mean-color channels are (2 * mean / 255 - 1) scaled by 0.1.
/// Text features: marker_k counts occurrences of keyword k; background = -(number of hits), or -1
/// when no keyword occurs. Plain patches therefore score strongly negative against any query and
/// patches dominated by the queried marker score close to +1.
class SyntheticEmbeddingBackend final : public EmbeddingBackend {
public:
    SyntheticEmbeddingBackend();

    const EmbeddingBackendDescriptor& descriptor() const override { return descriptor_; }
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;
    std::vector<EmbeddingVector> embed_images(std::span<const PageImage> images) override;
    std::size_t max_batch() const override { return 64; }

    static EmbeddingVector embed_text_features(std::string_view text);
    static EmbeddingVector embed_image_features(const PageImage& image);

private:
    EmbeddingBackendDescriptor descriptor_;
};

}  // namespace spotlight
