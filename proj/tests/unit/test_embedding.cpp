#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spotlight/answerer.hpp"
#include "spotlight/cache.hpp"
#include "spotlight/embedding.hpp"
#include "spotlight/error.hpp"
#include "spotlight/mock_backends.hpp"
#include "spotlight/query.hpp"
#include "spotlight/synthetic_backend.hpp"
#include "synthetic_pages.hpp"

using namespace spotlight;

namespace {

EmbeddingVector vec(std::vector<double> v) { return EmbeddingVector(std::move(v)); }

// Counts calls and can misreport its dimension.
class CountingBackend final : public EmbeddingBackend {
public:
    explicit CountingBackend(std::size_t reported_dim = 3, std::size_t batch = 4)
        : desc_{"counting", 3, BackendKind::synthetic}, reported_(reported_dim), batch_(batch) {}
    const EmbeddingBackendDescriptor& descriptor() const override { return desc_; }
    std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override {
        ++calls;
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) out.push_back(checked_embedding(make(t.size()), desc_.dim, desc_.backend_id));
        return out;
    }
    std::vector<EmbeddingVector> embed_images(std::span<const PageImage> images) override {
        ++calls;
        max_seen = std::max<std::size_t>(max_seen, images.size());
        std::vector<EmbeddingVector> out;
        for (const auto& im : images) {
            out.push_back(checked_embedding(make(static_cast<std::size_t>(im.at(0, 0).r)), desc_.dim, desc_.backend_id));
        }
        return out;
    }
    std::size_t max_batch() const override { return batch_; }

    std::atomic<int> calls{0};
    std::size_t max_seen = 0;

private:
    std::vector<double> make(std::size_t seed) const {
        std::vector<double> v(reported_, 0.0);
        v[0] = 1.0 + static_cast<double>(seed);
        return v;
    }
    EmbeddingBackendDescriptor desc_;
    std::size_t reported_;
    std::size_t batch_;
};

}  // namespace

TEST(CleanQuery, DropsStopwordsAndPossessive) {
    EXPECT_EQ(clean_query("What is the value of m in the Decomposer's MLP?"), "value m decomposer mlp");
}

TEST(CleanQuery, IdentityWithoutStopwords) {
    EXPECT_EQ(clean_query("grilled tomato price"), "grilled tomato price");
}

TEST(CleanQuery, DishQuestion) {
    EXPECT_EQ(clean_query("Is the Nawarattan Korma dish vegetarian?"), "nawarattan korma dish vegetarian");
}

TEST(CleanQuery, KeepsNumerals) {
    EXPECT_EQ(clean_query("What was revenue in 2019, in $M?"), "revenue 2019 m");
    EXPECT_EQ(clean_query("Is 85.07 the score?"), "85.07 score");
}

TEST(CleanQuery, EmptyQueryIsDomainError) {
    EXPECT_THROW(clean_query("   "), DomainError);
    EXPECT_THROW(clean_query("?!"), DomainError);
}

TEST(CleanQuery, LlmModeNeedsBackend) {
    EXPECT_THROW(clean_query("what is x", CleanMode::llm, nullptr), ConfigError);
}

TEST(CleanQuery, LlmModeTakesFirstLine) {
    MockMllmBackend mock(nlohmann::json{{"default", "  korma vegetarian  \nextra words"}});
    EXPECT_EQ(clean_query("Is the korma vegetarian?", CleanMode::llm, &mock), "korma vegetarian");
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(CleanQuery, LlmPromptCarriesTheQuery) {
    EXPECT_NE(query_cleaning_prompt("Is the korma vegetarian?").find("Is the korma vegetarian?"), std::string::npos);
}

TEST(CleanQuery, IdempotentOnRandomQueries) {
    const std::vector<std::string> words{"What",  "is",  "the",    "Total", "of",     "revenue", "in",  "2019?",
                                         "Which", "dish", "costs", "more",  "Korma's", "price",  "a",   "an",
                                         "1,200", "and",  "or",    "(B)",   "MLP",    "--",      "per", "year."};
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        std::string q;
        const int len = std::uniform_int_distribution<int>(1, 10)(rng);
        for (int k = 0; k < len; ++k) {
            q += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)] + " ";
        }
        std::string once;
        try {
            once = clean_query(q);
        } catch (const DomainError&) {
            continue;
        }
        EXPECT_EQ(clean_query(once), once) << q;
    }
}

TEST(EmbeddingVector, RejectsBadValues) {
    EXPECT_THROW(vec({}), DomainError);
    EXPECT_THROW(vec({0.0, 0.0}), DomainError);
    EXPECT_THROW(vec({1.0, NAN}), DomainError);
    EXPECT_THROW(vec({1.0, INFINITY}), DomainError);
}

TEST(CheckedEmbedding, DimMismatchIsContractError) {
    EXPECT_THROW(checked_embedding({1.0, 2.0}, 3, "b"), ContractError);
    EXPECT_THROW(checked_embedding({0.0, 0.0, 0.0}, 3, "b"), ContractError);
}

TEST(Cosine, SpotValues) {
    EXPECT_DOUBLE_EQ(cosine_sim(vec({3, 4}), vec({3, 4})), 1.0);
    EXPECT_DOUBLE_EQ(cosine_sim(vec({1, 0}), vec({0, 1})), 0.0);
    EXPECT_NEAR(cosine_sim(vec({1, 0}), vec({1, 1})), 0.70711, 1e-5);
    EXPECT_THROW(cosine_sim(vec({1, 0}), vec({1, 0, 0})), DomainError);
}

TEST(Cosine, ClampedToUnitInterval) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> a(7);
        for (auto& x : a) x = g(rng) * 1e6;
        const auto u = vec(a);
        const double c = cosine_sim(u, u);
        EXPECT_LE(c, 1.0);
        EXPECT_GE(c, -1.0);
    }
}

TEST(Softmax, SumsToOneAndShiftInvariant) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> s(36);
        for (auto& x : s) x = u(rng);
        const auto p = softmax(s);
        double sum = 0.0;
        for (double v : p) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        std::vector<double> shifted = s;
        for (auto& x : shifted) x += 123.0;
        const auto q = softmax(shifted);
        for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
        for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], fixtures::softmax_at(s, k), 1e-12);
    }
}

TEST(SelectPatch, UniformSimsPickFirstCell) {
    const std::vector<double> sims(36, 0.3);
    const auto r = select_from_sims(sims, GridSpec(6));
    EXPECT_EQ(r.i_star, 1);
    EXPECT_EQ(r.j_star, 1);
    EXPECT_NEAR(r.p, 1.0 / 36.0, 1e-15);
}

TEST(SelectPatch, SingleSpike) {
    std::vector<double> sims(36, 0.0);
    sims[2 * 6 + 3] = 1.0;  // (3,4)
    const auto r = select_from_sims(sims, GridSpec(6));
    EXPECT_EQ(r.i_star, 3);
    EXPECT_EQ(r.j_star, 4);
    EXPECT_NEAR(r.p, std::exp(1.0) / (std::exp(1.0) + 35.0), 1e-12);
    EXPECT_NEAR(r.p, 0.072068, 1e-6);
    EXPECT_DOUBLE_EQ(r.center.xn, 7.0 / 12.0);
    EXPECT_DOUBLE_EQ(r.center.yn, 5.0 / 12.0);
    EXPECT_DOUBLE_EQ(r.sim(3, 4), 1.0);
}

TEST(SelectPatch, ShiftLeavesSelectionUnchanged) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> s(25);
        for (auto& x : s) x = u(rng) * 0.4;
        const auto a = select_from_sims(s, GridSpec(5));
        for (auto& x : s) x += 0.5;
        const auto b = select_from_sims(s, GridSpec(5));
        EXPECT_EQ(a.i_star, b.i_star);
        EXPECT_EQ(a.j_star, b.j_star);
        EXPECT_NEAR(a.p, b.p, 1e-12);
    }
}

TEST(SelectPatch, WinnerIncreaseRaisesConfidence) {
    std::vector<double> s(36, 0.1);
    s[10] = 0.5;
    const double before = select_from_sims(s, GridSpec(6)).p;
    s[10] = 0.6;
    EXPECT_GT(select_from_sims(s, GridSpec(6)).p, before);
}

TEST(SelectPatch, PermutingLosersKeepsWinner) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1.0, 0.9);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> s(36);
        for (auto& x : s) x = u(rng);
        const std::size_t w = std::uniform_int_distribution<std::size_t>(0, 35)(rng);
        s[w] = 0.95;
        const auto a = select_from_sims(s, GridSpec(6));
        std::vector<double> rest;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (k != w) rest.push_back(s[k]);
        }
        std::shuffle(rest.begin(), rest.end(), rng);
        std::size_t r = 0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (k != w) s[k] = rest[r++];
        }
        const auto b = select_from_sims(s, GridSpec(6));
        EXPECT_EQ(a.i_star, b.i_star);
        EXPECT_EQ(a.j_star, b.j_star);
    }
}

TEST(SelectPatch, WrongCountIsDomainError) {
    const std::vector<EmbeddingVector> v(35, vec({1.0}));
    EXPECT_THROW(select_patch(vec({1.0}), v, GridSpec(6)), DomainError);
}

TEST(SyntheticBackend, DeterministicAndDimensioned) {
    SyntheticEmbeddingBackend b;
    const auto a1 = embed_text(b, "abc");
    const auto a2 = embed_text(b, "abc");
    EXPECT_EQ(a1, a2);
    EXPECT_EQ(a1.dim(), b.descriptor().dim);
    EXPECT_EQ(b.descriptor().kind, BackendKind::synthetic);
    const auto page = fixtures::make_noise_page(1, 30, 30);
    EXPECT_EQ(b.embed_images(std::span(&page, 1))[0].dim(), b.descriptor().dim);
}

TEST(SyntheticBackend, KeywordMatchesGlyph) {
    SyntheticEmbeddingBackend b;
    const auto palette = synthetic_palette();
    const auto glyph = PageImage::filled("g", 10, 10, palette[2].color);
    const auto plain = PageImage::filled("p", 10, 10, {230, 230, 150});
    const auto q = embed_text(b, std::string("the ") + std::string(palette[2].keyword) + " total");
    EXPECT_GT(cosine_sim(q, SyntheticEmbeddingBackend::embed_image_features(glyph)),
              cosine_sim(q, SyntheticEmbeddingBackend::embed_image_features(plain)) + 1.0);
}

TEST(EmbedPatches, OrderCountAndBatching) {
    CountingBackend b(3, 4);
    std::vector<PageImage> imgs;
    for (int k = 0; k < 36; ++k) imgs.push_back(PageImage::filled("i", 2, 2, {static_cast<std::uint8_t>(k), 0, 0}));
    const auto out = embed_patches(b, imgs, 3);
    ASSERT_EQ(out.size(), 36u);
    for (int k = 0; k < 36; ++k) EXPECT_DOUBLE_EQ(out[k].values()[0], 1.0 + k);
    EXPECT_EQ(b.calls.load(), 9);
    EXPECT_LE(b.max_seen, 4u);
}

TEST(EmbedPatches, EmptyAndDuplicates) {
    SyntheticEmbeddingBackend b;
    EXPECT_TRUE(embed_patches(b, {}).empty());
    const auto page = fixtures::make_noise_page(4, 20, 20);
    const std::vector<PageImage> dup{page, page.with_id("other")};
    const auto out = embed_patches(b, dup);
    EXPECT_EQ(out[0], out[1]);
}

TEST(EmbedPatches, WrongLengthIsContractError) {
    CountingBackend b(5);
    const std::vector<PageImage> imgs{PageImage::filled("i", 2, 2, {1, 0, 0})};
    EXPECT_THROW(embed_patches(b, imgs), ContractError);
    EXPECT_THROW(embed_text(b, "abc"), ContractError);
}

TEST(CachedEmbedding, SecondCallIsServedFromCache) {
    fixtures::TempDir dir("emb-cache");
    ContentCache cache(dir.path());
    CountingBackend inner;
    CachedEmbeddingBackend cached(inner, cache);
    const std::vector<std::string> texts{"a", "bb", "a"};
    const auto first = cached.embed_texts(texts);
    const int calls = inner.calls.load();
    const auto second = cached.embed_texts(texts);
    EXPECT_EQ(inner.calls.load(), calls);
    ASSERT_EQ(second.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(first[k], second[k]);
    EXPECT_GE(cache.stats().hits, 3u);
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "embeddings"));
}

TEST(CachedEmbedding, KeysDependOnBackendAndContent) {
    const EmbeddingBackendDescriptor a{"a", 3, BackendKind::synthetic};
    const EmbeddingBackendDescriptor b{"b", 3, BackendKind::synthetic};
    EXPECT_NE(CachedEmbeddingBackend::text_key(a, "x"), CachedEmbeddingBackend::text_key(b, "x"));
    EXPECT_NE(CachedEmbeddingBackend::text_key(a, "x"), CachedEmbeddingBackend::text_key(a, "y"));
    const auto p = PageImage::filled("p", 2, 2, {1, 2, 3});
    EXPECT_EQ(CachedEmbeddingBackend::image_key(a, p), CachedEmbeddingBackend::image_key(a, p.with_id("q")));
}

TEST(NeedleSuite, SelectionRecoversPlantedCell) {
    SyntheticEmbeddingBackend b;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto c = fixtures::make_needle_case(seed);
        const auto patches = grid_slice(c.page, GridSpec(6));
        std::vector<PageImage> imgs;
        for (const auto& p : patches) imgs.push_back(p.image);
        const auto r = select_patch(embed_text(b, clean_query(c.question)), embed_patches(b, imgs), GridSpec(6));
        EXPECT_EQ(r.i_star, c.i) << seed;
        EXPECT_EQ(r.j_star, c.j) << seed;
    }
}
