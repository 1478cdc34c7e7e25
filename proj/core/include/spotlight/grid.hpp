#pragma once

#include <vector>

#include "spotlight/image.hpp"

namespace spotlight {

/// n x n tiling; 1 <= n <= 64.
class GridSpec {
public:
    static constexpr int kMaxSide = 64;

    explicit GridSpec(int n = 6);

    int n() const noexcept { return n_; }
    int cells() const noexcept { return n_ * n_; }

private:
    int n_;
};

/// One grid cell: 1-based (i=row, j=col) and half-open pixel bounds.
struct PatchRect {
    int i = 1;
    int j = 1;
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    long long area() const noexcept { return static_cast<long long>(width()) * height(); }
    bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }

    friend bool operator==(const PatchRect&, const PatchRect&) = default;
};

/// Point in unit-square coordinates (x/W, y/H).
struct NormPoint {
    double xn = 0.5;
    double yn = 0.5;

    friend bool operator==(const NormPoint&, const NormPoint&) = default;
};

struct Patch {
    PatchRect rect;
    PageImage image;
};

/// ((2j-1)/(2n), (2i-1)/(2n)). Throws DomainError for indices outside 1..n.
NormPoint patch_center(int i, int j, const GridSpec& spec);

/// Floor-boundary tiling rects in row-major order: boundaries at floor(k*W/n), floor(k*H/n).
/// Throws DomainError when n > min(W, H).
std::vector<PatchRect> grid_rects(int width, int height, const GridSpec& spec);

/// grid_rects plus the cropped sub-image of each cell.
std::vector<Patch> grid_slice(const PageImage& page, const GridSpec& spec);

/// The rect containing a pixel; useful for mapping a normalized center back to a cell.
PatchRect cell_of_pixel(int x, int y, int width, int height, const GridSpec& spec);

}  // namespace spotlight
