#pragma once

// Independent reference implementations used to cross-check the library.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace spotlight::fixtures {

/// Full (m+1)x(n+1) matrix edit distance over code units of u32 strings.
inline std::size_t levenshtein_full(const std::u32string& a, const std::u32string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
        }
    }
    return d[a.size()][b.size()];
}

/// p of the argmax entry, summing exp(s - max) in double without any library helper.
inline double softmax_at(const std::vector<double>& s, std::size_t at) {
    double m = s[0];
    for (double v : s) m = v > m ? v : m;
    double z = 0.0;
    for (double v : s) z += std::exp(v - m);
    return std::exp(s[at] - m) / z;
}

/// (1 - a*M) * I + a*M * H with round-half-away-from-zero done by hand.
inline std::uint8_t blend_direct(std::uint8_t i, std::uint8_t h, double alpha, double m) {
    const double v = (1.0 - alpha * m) * i + alpha * m * h;
    const double r = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

/// exp(-((dx)^2 + (dy)^2) / (2 s^2)) raised to 0.5, written as the two-step form.
inline double mask_direct(double xn, double yn, double cx, double cy, double sigma) {
    const double g = std::exp(-((xn - cx) * (xn - cx) + (yn - cy) * (yn - cy)) / (2.0 * sigma * sigma));
    return std::sqrt(g);
}

/// Half-sample symmetric reflection of index k into [0, n).
inline int reflect_index(int k, int n) {
    const int period = 2 * n;
    int m = ((k % period) + period) % period;
    return m < n ? m : period - 1 - m;
}

/// Non-separable 2-D Gaussian convolution, normalised 2-D kernel, reflective borders.
inline std::vector<double> convolve2d_reflect(const std::vector<double>& g, int rows, int cols, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> out(g.size(), 0.0);
    double norm = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
    for (int y = 0; y < rows; ++y) {
        for (int x = 0; x < cols; ++x) {
            double acc = 0.0;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) / norm;
                    acc += w * g[static_cast<std::size_t>(reflect_index(y + dy, rows)) * cols + reflect_index(x + dx, cols)];
                }
            }
            out[static_cast<std::size_t>(y) * cols + x] = acc;
        }
    }
    return out;
}

}  // namespace spotlight::fixtures
