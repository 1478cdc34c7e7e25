#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spotlight/embedding.hpp"
#include "spotlight/grid.hpp"
#include "spotlight/image.hpp"
#include "spotlight/query.hpp"

namespace spotlight {

/// Sigmoid mapping from selection confidence to Gaussian spread, and the no-draw cutoff.
struct SigmaSchedule {
    double max_sigma = 0.8;
    double steepness = 10.0;
    double midpoint = 0.2;
    double draw_threshold = 0.2;  // sigma strictly below this => no highlight
};

/// max_sigma / (1 + exp(-steepness * (p - midpoint))). Throws DomainError unless 0 < p <= 1.
double adaptive_sigma(double p, const SigmaSchedule& schedule = {});

/// sigma >= threshold. Throws DomainError for negative sigma.
bool should_draw(double sigma, double threshold = SigmaSchedule{}.draw_threshold);

struct MaskParams {
    NormPoint center;
    double sigma = 0.0;
    bool draw = false;
};

/// Validates sigma in [0, max_sigma] and derives the draw flag.
MaskParams make_mask_params(NormPoint center, double sigma, const SigmaSchedule& schedule = {});

/// exp(-d^2 / (2 sigma^2))^0.5 = exp(-d^2 / (4 sigma^2)) with d measured in normalized (x/W, y/H) space.
double mask_weight(NormPoint at, const MaskParams& params) noexcept;

struct AttentionMask {
    int width = 0;
    int height = 0;
    std::vector<double> values;  // row-major

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Full mask buffer, for inspection/export; blending computes the same weights on the fly.
/// Throws DomainError when params.draw is false.
AttentionMask gaussian_mask(int width, int height, const MaskParams& params);

struct HighlightStyle {
    Rgb8 color{0, 0, 255};
    double alpha = 0.5;
};

void validate(const HighlightStyle& style);

struct AttendedImage {
    PageImage image;
    MaskParams params;
    HighlightStyle style;
};

/// round((1 - w) * value + w * highlight) with w = alpha * M, ties away from zero.
std::uint8_t blend_channel(std::uint8_t value, std::uint8_t highlight, double w) noexcept;

/// Blend against an explicit mask. Throws DomainError on dimension mismatch.
AttendedImage blend_highlight(const PageImage& page, const AttentionMask& mask, const HighlightStyle& style);

/// Blend computing the mask lazily per pixel; rows may be split across `threads`. Output is
/// bit-identical to blend_highlight(page, gaussian_mask(...), style) for any thread count.
/// When params.draw is false the page is returned unchanged.
AttendedImage render_highlight(const PageImage& page, const MaskParams& params, const HighlightStyle& style,
                               std::size_t threads = 1);

struct SpotlightConfig {
    GridSpec grid{6};
    HighlightStyle style;
    SigmaSchedule sigma;
    CleanMode clean_mode = CleanMode::rule_based;
    MllmBackend* cleaner = nullptr;  // used in llm cleaning mode
    std::size_t max_in_flight = 8;
    std::size_t render_threads = 1;
};

struct SpotlightResult {
    AttendedImage attended;
    SelectionResult selection;
    MaskParams params;
    std::string cleaned_query;
    double select_ms = 0.0;  // clean + slice + embed + argmax
    double mask_ms = 0.0;    // render
};

/// Query-guided highlight of one page: clean the query, tile, embed, select, derive sigma and
/// either render the Gaussian blend or pass the page through untouched.
SpotlightResult spotlight(const PageImage& page, std::string_view query, EmbeddingBackend& backend,
                          const SpotlightConfig& config = {});

}  // namespace spotlight
