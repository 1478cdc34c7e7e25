#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotlight/answerer.hpp"
#include "spotlight/image.hpp"

namespace spotlight {

struct OcclusionConfig {
    int window = 32;               // S: square window side, pixels
    int stride = 16;               // T: step between window origins, pixels
    Rgb8 fill{128, 128, 128};
    double smooth_sigma = 1.0;     // in cells
    std::size_t parallelism = 1;
    bool allow_fallback = true;    // answer-match 0/1 when the backend has no logits
};

/// Throws DomainError unless 1 <= S <= min(W, H) and T >= 1.
void validate(const OcclusionConfig& cfg, int width, int height);

/// Window origins along one axis: k*T for k = 0, 1, ... stopping after the first window that
/// reaches the far edge. The last window may be clipped.
std::vector<int> window_origins(int extent, int window, int stride);

struct SensitivityGrid {
    int rows = 0;
    int cols = 0;
    std::vector<int> origin_x;  // size cols
    std::vector<int> origin_y;  // size rows
    int window = 0;
    int stride = 0;
    double p_orig = 0.0;
    std::vector<double> values;  // row-major, S(x,y) = P_orig - P_occ

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
};

enum class ProbabilityMode { logits, answer_match };

/// Probability the backend produces `reference_answer` for (query, image).
/// With logits: softmax over the returned outcome logits, read at the reference's first
/// normalized token (0 if that outcome is absent). Without: 1 if the reply normalizes to the
/// reference, else 0 (only when allow_fallback). Throws ConfigError when neither is possible.
double response_probability(MllmBackend& backend, std::string_view query, const PageImage& image,
                            std::string_view reference_answer, bool allow_fallback = true,
                            ProbabilityMode* used = nullptr);

/// Slide the fill window over the image and record P_orig - P_occ per window position.
/// Any backend failure aborts the sweep (no partial grid is returned).
SensitivityGrid occlusion_sweep(const PageImage& image, std::string_view query, std::string_view reference_answer,
                                MllmBackend& backend, const OcclusionConfig& cfg);

/// Separable Gaussian smoothing in cell space, radius ceil(3 sigma), half-sample symmetric
/// reflection at the borders. sigma < 1e-6 returns the grid unchanged.
SensitivityGrid smooth_grid(const SensitivityGrid& grid, double smooth_sigma);

/// Piecewise-linear jet colormap over t in [0, 1]: blue -> cyan -> yellow -> red.
Rgb8 jet_color(double t) noexcept;

/// Heatmap alpha-composited over the source; each pixel takes the value of cell
/// (min(y / T, rows-1), min(x / T, cols-1)), normalized over the grid's [min, max].
PageImage render_heatmap(const PageImage& source, const SensitivityGrid& grid, double alpha = 0.5);

struct SmoothedHeatmap {
    SensitivityGrid grid;
    PageImage overlay;
};

SmoothedHeatmap smooth_heatmap(const SensitivityGrid& grid, const PageImage& source, double smooth_sigma);

nlohmann::json to_json(const SensitivityGrid& grid);

}  // namespace spotlight
