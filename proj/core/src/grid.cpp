#include "spotlight/grid.hpp"

#include <algorithm>
#include <string>

#include "spotlight/error.hpp"

namespace spotlight {

GridSpec::GridSpec(int n) : n_(n) {
    if (n < 1 || n > kMaxSide) {
        throw DomainError("grid side must be in [1, 64], got " + std::to_string(n));
    }
}

NormPoint patch_center(int i, int j, const GridSpec& spec) {
    const int n = spec.n();
    if (i < 1 || i > n || j < 1 || j > n) {
        throw DomainError("patch index (" + std::to_string(i) + "," + std::to_string(j) + ") outside 1.." +
                          std::to_string(n));
    }
    const double denom = 2.0 * n;
    return {(2.0 * j - 1.0) / denom, (2.0 * i - 1.0) / denom};
}

namespace {

// floor(k * extent / n) without overflow for realistic sizes.
int boundary(int k, int extent, int n) {
    return static_cast<int>((static_cast<long long>(k) * extent) / n);
}

}  // namespace

std::vector<PatchRect> grid_rects(int width, int height, const GridSpec& spec) {
    const int n = spec.n();
    if (width < 1 || height < 1) throw DomainError("page dimensions must be positive");
    if (n > std::min(width, height)) {
        throw DomainError("grid side " + std::to_string(n) + " exceeds min(W,H) = " +
                          std::to_string(std::min(width, height)));
    }
    std::vector<PatchRect> rects;
    rects.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 1; i <= n; ++i) {
        const int y0 = boundary(i - 1, height, n);
        const int y1 = boundary(i, height, n);
        for (int j = 1; j <= n; ++j) {
            rects.push_back({i, j, boundary(j - 1, width, n), y0, boundary(j, width, n), y1});
        }
    }
    return rects;
}

std::vector<Patch> grid_slice(const PageImage& page, const GridSpec& spec) {
    auto rects = grid_rects(page.width(), page.height(), spec);
    std::vector<Patch> patches;
    patches.reserve(rects.size());
    for (const auto& r : rects) {
        std::string id = page.id() + "#" + std::to_string(r.i) + "," + std::to_string(r.j);
        patches.push_back({r, page.crop(r.x0, r.y0, r.x1, r.y1, std::move(id))});
    }
    return patches;
}

PatchRect cell_of_pixel(int x, int y, int width, int height, const GridSpec& spec) {
    if (x < 0 || y < 0 || x >= width || y >= height) throw DomainError("pixel outside page");
    const auto rects = grid_rects(width, height, spec);
    for (const auto& r : rects) {
        if (r.contains(x, y)) return r;
    }
    throw DomainError("pixel not covered by grid");  // unreachable: tiling is exact
}

}  // namespace spotlight
