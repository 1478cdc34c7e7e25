#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spotlight/attention.hpp"
#include "spotlight/error.hpp"
#include "spotlight/synthetic_backend.hpp"
#include "synthetic_pages.hpp"

using namespace spotlight;

TEST(AdaptiveSigma, SpotValues) {
    EXPECT_DOUBLE_EQ(adaptive_sigma(0.2), 0.4);
    EXPECT_NEAR(adaptive_sigma(1.0 / 36.0), 0.1213, 1e-4);
    EXPECT_NEAR(adaptive_sigma(1.0), 0.79973, 1e-5);
}

TEST(AdaptiveSigma, RejectsOutOfRange) {
    EXPECT_THROW(adaptive_sigma(0.0), DomainError);
    EXPECT_THROW(adaptive_sigma(1.0000001), DomainError);
    EXPECT_THROW(adaptive_sigma(NAN), DomainError);
}

TEST(AdaptiveSigma, StrictlyIncreasingInsideRange) {
    double prev = 0.0;
    for (int k = 1; k <= 1000; ++k) {
        const double s = adaptive_sigma(k / 1000.0);
        EXPECT_GT(s, prev);
        EXPECT_LT(s, 0.8);
        prev = s;
    }
}

TEST(ShouldDraw, ThresholdIsInclusive) {
    EXPECT_FALSE(should_draw(0.19));
    EXPECT_TRUE(should_draw(0.2));
    EXPECT_TRUE(should_draw(0.4));
    EXPECT_THROW(should_draw(-0.1), DomainError);
}

TEST(MaskParams, DrawFollowsSigma) {
    EXPECT_FALSE(make_mask_params({0.5, 0.5}, 0.1).draw);
    EXPECT_TRUE(make_mask_params({0.5, 0.5}, 0.3).draw);
    EXPECT_THROW(make_mask_params({0.5, 0.5}, 0.81), DomainError);
    EXPECT_THROW(make_mask_params({1.5, 0.5}, 0.3), DomainError);
}

TEST(GaussianMask, CentreAndFoldedExponent) {
    const auto params = make_mask_params({0.5, 0.5}, 0.25);
    EXPECT_DOUBLE_EQ(mask_weight({0.5, 0.5}, params), 1.0);
    // d^2 = 4 sigma^2 along x.
    EXPECT_NEAR(mask_weight({0.5 + 2 * 0.25, 0.5}, params), std::exp(-1.0), 1e-12);
    EXPECT_NEAR(mask_weight({0.5 + 2 * 0.25, 0.5}, params), 0.36788, 1e-5);
    const auto m = gaussian_mask(100, 100, params);
    EXPECT_DOUBLE_EQ(m.at(50, 50), 1.0);
    EXPECT_DOUBLE_EQ(m.at(40, 50), m.at(60, 50));
    EXPECT_DOUBLE_EQ(m.at(50, 40), m.at(40, 50));
}

TEST(GaussianMask, MatchesTwoStepFormula) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const NormPoint c{u(rng), u(rng)};
        const double sigma = 0.2 + 0.6 * u(rng);
        const auto params = make_mask_params(c, sigma);
        const auto m = gaussian_mask(37, 23, params);
        for (int y = 0; y < 23; y += 3) {
            for (int x = 0; x < 37; x += 3) {
                EXPECT_NEAR(m.at(x, y), fixtures::mask_direct(x / 37.0, y / 23.0, c.xn, c.yn, sigma), 1e-12);
            }
        }
    }
}

TEST(GaussianMask, NoDrawIsDomainError) {
    EXPECT_THROW(gaussian_mask(10, 10, make_mask_params({0.5, 0.5}, 0.1)), DomainError);
}

TEST(Blend, SpotValues) {
    EXPECT_EQ(blend_channel(200, 0, 0.25), 150);
    EXPECT_EQ(blend_channel(40, 0, 0.25), 30);
    EXPECT_EQ(blend_channel(0, 255, 0.25), 64);  // 63.75
    EXPECT_EQ(blend_channel(100, 0, 0.5), 50);
    EXPECT_EQ(blend_channel(100, 255, 0.5), 178);  // 177.5 rounds away from zero
    EXPECT_EQ(blend_channel(1, 0, 0.5), 1);        // 0.5 rounds up
}

TEST(Blend, WholeImageSpotValues) {
    const auto page = PageImage::filled("p", 3, 2, {200, 40, 0});
    AttentionMask half{3, 2, std::vector<double>(6, 0.5)};
    const auto out = blend_highlight(page, half, {{0, 0, 255}, 0.5});
    EXPECT_EQ(out.image.at(2, 1), (Rgb8{150, 30, 64}));

    const auto grey = PageImage::filled("g", 3, 2, {100, 100, 100});
    AttentionMask ones{3, 2, std::vector<double>(6, 1.0)};
    EXPECT_EQ(blend_highlight(grey, ones, {{0, 0, 255}, 0.5}).image.at(0, 0), (Rgb8{50, 50, 178}));
}

TEST(Blend, DimMismatchAndBadAlpha) {
    const auto page = PageImage::filled("p", 3, 2, {1, 1, 1});
    AttentionMask m{2, 2, std::vector<double>(4, 1.0)};
    EXPECT_THROW(blend_highlight(page, m, {}), DomainError);
    AttentionMask ok{3, 2, std::vector<double>(6, 1.0)};
    EXPECT_THROW(blend_highlight(page, ok, {{0, 0, 255}, 1.5}), DomainError);
}

TEST(Blend, AlphaOneFullMaskGivesHighlightColour) {
    const auto page = fixtures::make_noise_page(3, 20, 10);
    AttentionMask ones{20, 10, std::vector<double>(200, 1.0)};
    const auto out = blend_highlight(page, ones, {{12, 200, 7}, 1.0});
    EXPECT_EQ(out.image, PageImage::filled("x", 20, 10, {12, 200, 7}));
}

TEST(Render, MatchesDirectFormulaAndBounds) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 30; ++t) {
        const auto page = fixtures::make_noise_page(t, 31, 29);
        const auto params = make_mask_params({u(rng), u(rng)}, 0.2 + 0.6 * u(rng));
        const HighlightStyle style{{static_cast<std::uint8_t>(rng() % 256), static_cast<std::uint8_t>(rng() % 256),
                                    static_cast<std::uint8_t>(rng() % 256)},
                                   u(rng)};
        const auto out = render_highlight(page, params, style);
        for (int y = 0; y < 29; ++y) {
            for (int x = 0; x < 31; ++x) {
                const double m = fixtures::mask_direct(x / 31.0, y / 29.0, params.center.xn, params.center.yn, params.sigma);
                const Rgb8 in = page.at(x, y);
                const Rgb8 got = out.image.at(x, y);
                ASSERT_EQ(got.r, fixtures::blend_direct(in.r, style.color.r, style.alpha, m));
                ASSERT_EQ(got.g, fixtures::blend_direct(in.g, style.color.g, style.alpha, m));
                ASSERT_EQ(got.b, fixtures::blend_direct(in.b, style.color.b, style.alpha, m));
            }
        }
    }
}

TEST(Render, ParallelRowsAreBitIdentical) {
    const auto page = fixtures::make_noise_page(1, 200, 150);
    const auto params = make_mask_params({0.3, 0.7}, 0.35);
    const auto a = render_highlight(page, params, {}, 1);
    const auto b = render_highlight(page, params, {}, 4);
    EXPECT_EQ(a.image, b.image);
}

TEST(Render, NoDrawPassesThrough) {
    const auto page = fixtures::make_noise_page(2, 50, 40);
    const auto out = render_highlight(page, make_mask_params({0.5, 0.5}, 0.1), {});
    EXPECT_EQ(out.image, page);
    EXPECT_FALSE(out.params.draw);
}

TEST(Spotlight, UniformPageDoesNotDraw) {
    SyntheticEmbeddingBackend b;
    const auto page = PageImage::filled("u", 120, 120, {230, 220, 160});
    const auto r = spotlight::spotlight(page, "What is the crimson total?", b);
    EXPECT_NEAR(r.selection.p, 1.0 / 36.0, 1e-12);
    EXPECT_NEAR(r.params.sigma, 0.1213, 1e-4);
    EXPECT_FALSE(r.params.draw);
    EXPECT_EQ(r.attended.image, page);
    EXPECT_EQ(r.selection.i_star, 1);
    EXPECT_EQ(r.selection.j_star, 1);
}

TEST(Spotlight, SingleCellGridCentresOnPage) {
    SyntheticEmbeddingBackend b;
    const auto c = fixtures::make_needle_case(4, 120, 6);
    SpotlightConfig cfg;
    cfg.grid = GridSpec(1);
    const auto r = spotlight::spotlight(c.page, c.question, b, cfg);
    EXPECT_DOUBLE_EQ(r.selection.p, 1.0);
    EXPECT_NEAR(r.params.sigma, 0.79973, 1e-5);
    EXPECT_TRUE(r.params.draw);
    EXPECT_DOUBLE_EQ(r.params.center.xn, 0.5);
    EXPECT_DOUBLE_EQ(r.params.center.yn, 0.5);
}

TEST(Spotlight, NeedleIsHighlighted) {
    SyntheticEmbeddingBackend b;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        const auto c = fixtures::make_needle_case(seed);
        const auto r = spotlight::spotlight(c.page, c.question, b);
        EXPECT_EQ(r.selection.i_star, c.i);
        EXPECT_EQ(r.selection.j_star, c.j);
        EXPECT_TRUE(r.params.draw) << "sigma " << r.params.sigma;
        EXPECT_TRUE(c.cell.contains(static_cast<int>(r.params.center.xn * c.page.width()),
                                    static_cast<int>(r.params.center.yn * c.page.height())));
        EXPECT_NE(r.attended.image, c.page);
    }
}

TEST(Spotlight, EmptyQueryThrows) {
    SyntheticEmbeddingBackend b;
    EXPECT_THROW(spotlight::spotlight(PageImage::filled("u", 12, 12, {1, 1, 1}), "  ", b), DomainError);
}
