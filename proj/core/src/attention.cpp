#include "spotlight/attention.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "spotlight/error.hpp"
#include "spotlight/parallel.hpp"

namespace spotlight {

double adaptive_sigma(double p, const SigmaSchedule& schedule) {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("confidence p must lie in (0, 1], got " + std::to_string(p));
    return schedule.max_sigma / (1.0 + std::exp(-schedule.steepness * (p - schedule.midpoint)));
}

bool should_draw(double sigma, double threshold) {
    if (!(sigma >= 0.0)) throw DomainError("sigma must be non-negative");
    return sigma >= threshold;
}

MaskParams make_mask_params(NormPoint center, double sigma, const SigmaSchedule& schedule) {
    if (!(sigma >= 0.0 && sigma <= schedule.max_sigma)) {
        throw DomainError("sigma " + std::to_string(sigma) + " outside [0, " + std::to_string(schedule.max_sigma) + "]");
    }
    if (!(center.xn >= 0.0 && center.xn <= 1.0 && center.yn >= 0.0 && center.yn <= 1.0)) {
        throw DomainError("mask center outside the unit square");
    }
    return {center, sigma, should_draw(sigma, schedule.draw_threshold)};
}

double mask_weight(NormPoint at, const MaskParams& params) noexcept {
    const double dx = at.xn - params.center.xn;
    const double dy = at.yn - params.center.yn;
    if (params.sigma == 0.0) return dx == 0.0 && dy == 0.0 ? 1.0 : 0.0;
    return std::exp(-(dx * dx + dy * dy) / (4.0 * params.sigma * params.sigma));
}

namespace {

NormPoint pixel_coord(int x, int y, int width, int height) noexcept {
    return {static_cast<double>(x) / width, static_cast<double>(y) / height};
}

}  // namespace

AttentionMask gaussian_mask(int width, int height, const MaskParams& params) {
    if (!params.draw) throw DomainError("gaussian_mask called with draw=false; skip masking instead");
    if (width < 1 || height < 1) throw DomainError("mask dimensions must be positive");
    AttentionMask mask{width, height, std::vector<double>(static_cast<std::size_t>(width) * height)};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask.values[static_cast<std::size_t>(y) * width + x] = mask_weight(pixel_coord(x, y, width, height), params);
    return mask;
}

void validate(const HighlightStyle& style) {
    if (!(style.alpha >= 0.0 && style.alpha <= 1.0)) throw DomainError("highlight alpha must lie in [0, 1]");
}

std::uint8_t blend_channel(std::uint8_t value, std::uint8_t highlight, double w) noexcept {
    const double v = (1.0 - w) * value + w * highlight;
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

namespace {

template <class WeightFn>
PageImage blend_rows(const PageImage& page, const HighlightStyle& style, std::size_t threads, WeightFn&& weight) {
    ImageBuffer out(page);
    const int w = page.width();
    parallel_for(static_cast<std::size_t>(page.height()), threads, [&](std::size_t yy) {
        const int y = static_cast<int>(yy);
        auto row = out.row(y);
        for (int x = 0; x < w; ++x) {
            const double a = style.alpha * weight(x, y);
            auto* px = row.data() + static_cast<std::size_t>(x) * 3;
            px[0] = blend_channel(px[0], style.color.r, a);
            px[1] = blend_channel(px[1], style.color.g, a);
            px[2] = blend_channel(px[2], style.color.b, a);
        }
    });
    return std::move(out).freeze(page.id());
}

}  // namespace

AttendedImage blend_highlight(const PageImage& page, const AttentionMask& mask, const HighlightStyle& style) {
    validate(style);
    if (mask.width != page.width() || mask.height != page.height()) {
        throw DomainError("mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                          " does not match page " + std::to_string(page.width()) + "x" +
                          std::to_string(page.height()));
    }
    for (double v : mask.values) {
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("mask values must lie in [0, 1]");
    }
    PageImage img = blend_rows(page, style, 1, [&](int x, int y) { return mask.at(x, y); });
    return {std::move(img), MaskParams{}, style};
}

AttendedImage render_highlight(const PageImage& page, const MaskParams& params, const HighlightStyle& style,
                               std::size_t threads) {
    validate(style);
    if (!params.draw) return {page, params, style};
    const int w = page.width();
    const int h = page.height();
    PageImage img = blend_rows(page, style, threads,
                               [&](int x, int y) { return mask_weight(pixel_coord(x, y, w, h), params); });
    return {std::move(img), params, style};
}

SpotlightResult spotlight(const PageImage& page, std::string_view query, EmbeddingBackend& backend,
                          const SpotlightConfig& config) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    SpotlightResult result;
    result.cleaned_query = clean_query(query, config.clean_mode, config.cleaner);
    const auto patches = grid_slice(page, config.grid);
    std::vector<PageImage> crops;
    crops.reserve(patches.size());
    for (const auto& p : patches) crops.push_back(p.image);

    const EmbeddingVector qvec = embed_text(backend, result.cleaned_query);
    const auto pvecs = embed_patches(backend, crops, config.max_in_flight);
    result.selection = select_patch(qvec, pvecs, config.grid, page.id());
    const double sigma = adaptive_sigma(result.selection.p, config.sigma);
    result.params = make_mask_params(result.selection.center, sigma, config.sigma);
    const auto t1 = clock::now();

    result.attended = render_highlight(page, result.params, config.style, config.render_threads);
    const auto t2 = clock::now();

    result.select_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.mask_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    return result;
}

}  // namespace spotlight
