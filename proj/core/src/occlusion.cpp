#include "spotlight/occlusion.hpp"

#include <algorithm>
#include <cmath>

#include "spotlight/embedding.hpp"
#include "spotlight/error.hpp"
#include "spotlight/parallel.hpp"

namespace spotlight {

void validate(const OcclusionConfig& cfg, int width, int height) {
    if (cfg.window < 1) throw DomainError("occlusion window must be >= 1");
    if (cfg.stride < 1) throw DomainError("occlusion stride must be >= 1");
    if (cfg.window > std::min(width, height)) {
        throw DomainError("occlusion window " + std::to_string(cfg.window) + " exceeds min(W,H) = " +
                          std::to_string(std::min(width, height)));
    }
    if (!(cfg.smooth_sigma >= 0.0)) throw DomainError("smooth_sigma must be non-negative");
}

std::vector<int> window_origins(int extent, int window, int stride) {
    std::vector<int> out;
    for (int x = 0; x < extent; x += stride) {
        out.push_back(x);
        if (x + window >= extent) break;
    }
    return out;
}

double response_probability(MllmBackend& backend, std::string_view query, const PageImage& image,
                            std::string_view reference_answer, bool allow_fallback, ProbabilityMode* used) {
    const bool logits_mode = backend.descriptor().supports_logits;
    if (!logits_mode && !allow_fallback) {
        throw ConfigError("backend '" + backend.descriptor().backend_id +
                          "' exposes no logits and answer-match fallback is disabled");
    }
    MllmRequest req;
    req.prompt = build_prompt(query, PromptMode::baseline);
    req.images.push_back(encode_png(image));
    req.model_id = backend.descriptor().model_id;
    req.want_logits = logits_mode;
    const MllmReply reply = backend.complete(req);

    const auto ref_tokens = normalize_answer(reference_answer);
    if (logits_mode && reply.logits && !reply.logits->empty()) {
        if (used) *used = ProbabilityMode::logits;
        std::vector<std::string> outcomes;
        std::vector<double> z;
        for (const auto& [outcome, logit] : *reply.logits) {
            outcomes.push_back(outcome);
            z.push_back(logit);
        }
        const auto probs = softmax(z);
        const std::string target = ref_tokens.empty() ? std::string() : ref_tokens.front();
        for (std::size_t k = 0; k < outcomes.size(); ++k) {
            const auto norm = normalize_answer(outcomes[k]);
            const std::string first = norm.empty() ? outcomes[k] : norm.front();
            if (first == target) return probs[k];
        }
        return 0.0;
    }
    if (!allow_fallback) throw ConfigError("backend returned no logits and fallback is disabled");
    if (used) *used = ProbabilityMode::answer_match;
    return normalize_answer(reply.text) == ref_tokens ? 1.0 : 0.0;
}

SensitivityGrid occlusion_sweep(const PageImage& image, std::string_view query, std::string_view reference_answer,
                                MllmBackend& backend, const OcclusionConfig& cfg) {
    validate(cfg, image.width(), image.height());
    SensitivityGrid g;
    g.origin_x = window_origins(image.width(), cfg.window, cfg.stride);
    g.origin_y = window_origins(image.height(), cfg.window, cfg.stride);
    g.cols = static_cast<int>(g.origin_x.size());
    g.rows = static_cast<int>(g.origin_y.size());
    g.window = cfg.window;
    g.stride = cfg.stride;
    g.p_orig = response_probability(backend, query, image, reference_answer, cfg.allow_fallback);
    g.values.assign(static_cast<std::size_t>(g.rows) * g.cols, 0.0);

    parallel_for(g.values.size(), cfg.parallelism, [&](std::size_t cell) {
        const int r = static_cast<int>(cell / g.cols);
        const int c = static_cast<int>(cell % g.cols);
        const int x0 = g.origin_x[c];
        const int y0 = g.origin_y[r];
        ImageBuffer occluded(image);
        occluded.fill_rect(x0, y0, x0 + cfg.window, y0 + cfg.window, cfg.fill);
        const PageImage img = std::move(occluded).freeze(image.id());
        const double p_occ = response_probability(backend, query, img, reference_answer, cfg.allow_fallback);
        g.values[cell] = g.p_orig - p_occ;
    });
    return g;
}

namespace {

std::vector<double> gaussian_kernel(double sigma, int& radius) {
    radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int d = -radius; d <= radius; ++d) {
        const double w = std::exp(-0.5 * d * d / (sigma * sigma));
        k[static_cast<std::size_t>(d + radius)] = w;
        total += w;
    }
    for (double& w : k) w /= total;
    return k;
}

// Half-sample symmetric extension: ... c b a | a b c ... | c b a ..., period 2n.
int reflect(int i, int n) {
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace

SensitivityGrid smooth_grid(const SensitivityGrid& grid, double smooth_sigma) {
    if (grid.rows < 1 || grid.cols < 1) throw DomainError("cannot smooth an empty grid");
    if (smooth_sigma < 1e-6) return grid;
    int radius = 0;
    const auto kernel = gaussian_kernel(smooth_sigma, radius);

    SensitivityGrid tmp = grid;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) acc += kernel[d + radius] * grid.at(r, reflect(c + d, grid.cols));
            tmp.at(r, c) = acc;
        }
    }
    SensitivityGrid out = tmp;
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) acc += kernel[d + radius] * tmp.at(reflect(r + d, grid.rows), c);
            out.at(r, c) = acc;
        }
    }
    return out;
}

Rgb8 jet_color(double t) noexcept {
    t = std::clamp(t, 0.0, 1.0);
    auto ch = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
    const double r = std::clamp(1.5 - std::abs(4.0 * t - 3.0), 0.0, 1.0);
    const double g = std::clamp(1.5 - std::abs(4.0 * t - 2.0), 0.0, 1.0);
    const double b = std::clamp(1.5 - std::abs(4.0 * t - 1.0), 0.0, 1.0);
    return {ch(r), ch(g), ch(b)};
}

PageImage render_heatmap(const PageImage& source, const SensitivityGrid& grid, double alpha) {
    if (grid.rows < 1 || grid.cols < 1) throw DomainError("cannot render an empty grid");
    const auto [lo_it, hi_it] = std::minmax_element(grid.values.begin(), grid.values.end());
    const double lo = *lo_it;
    const double span = *hi_it - lo;
    const int step = std::max(1, grid.stride);
    ImageBuffer out(source);
    for (int y = 0; y < source.height(); ++y) {
        const int r = std::min(y / step, grid.rows - 1);
        for (int x = 0; x < source.width(); ++x) {
            const int c = std::min(x / step, grid.cols - 1);
            const double t = span > 0.0 ? (grid.at(r, c) - lo) / span : 0.0;
            const Rgb8 heat = jet_color(t);
            const Rgb8 src = source.at(x, y);
            auto mix = [&](std::uint8_t a, std::uint8_t b) {
                return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * a + alpha * b));
            };
            out.set(x, y, {mix(src.r, heat.r), mix(src.g, heat.g), mix(src.b, heat.b)});
        }
    }
    return std::move(out).freeze(source.id());
}

SmoothedHeatmap smooth_heatmap(const SensitivityGrid& grid, const PageImage& source, double smooth_sigma) {
    SmoothedHeatmap h{smooth_grid(grid, smooth_sigma), {}};
    h.overlay = render_heatmap(source, h.grid);
    return h;
}

nlohmann::json to_json(const SensitivityGrid& grid) {
    nlohmann::json values = nlohmann::json::array();
    for (int r = 0; r < grid.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < grid.cols; ++c) row.push_back(grid.at(r, c));
        values.push_back(std::move(row));
    }
    return {{"rows", grid.rows},         {"cols", grid.cols},         {"window", grid.window},
            {"stride", grid.stride},     {"origin_x", grid.origin_x}, {"origin_y", grid.origin_y},
            {"p_orig", grid.p_orig},     {"values", std::move(values)}};
}

}  // namespace spotlight
