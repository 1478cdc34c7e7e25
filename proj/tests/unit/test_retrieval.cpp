#include <gtest/gtest.h>

#include <random>
#include <set>

#include "spotlight/error.hpp"
#include "spotlight/query.hpp"
#include "spotlight/retrieval.hpp"
#include "spotlight/synthetic_backend.hpp"
#include "synthetic_pages.hpp"

using namespace spotlight;

namespace {

std::vector<PageImage> corpus_images(const std::vector<fixtures::CorpusPage>& corpus) {
    std::vector<PageImage> out;
    for (const auto& c : corpus) out.push_back(c.page);
    return out;
}

}  // namespace

TEST(IndexPages, OneEntryPerPageAndDeterministic) {
    SyntheticEmbeddingBackend b;
    const auto corpus = fixtures::make_retrieval_corpus(10, 1);
    const auto imgs = corpus_images(corpus);
    const auto a = index_pages(imgs, b, "t0");
    const auto c = index_pages(imgs, b, "t0");
    ASSERT_EQ(a.size(), 10u);
    std::set<std::string> ids;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ids.insert(a.entries()[k].page_id);
        EXPECT_EQ(a.entries()[k].vector, c.entries()[k].vector);
    }
    EXPECT_EQ(ids.size(), 10u);
    EXPECT_EQ(a.backend_id(), "synthetic-v1");
}

TEST(IndexPages, RejectsDuplicatesAndMixedDims) {
    const EmbeddingVector v3({1.0, 0.0, 0.0});
    const EmbeddingVector v2({1.0, 0.0});
    EXPECT_THROW(CorpusIndex("b", 3, {{"x", {}, v3}, {"x", {}, v3}}, ""), ValidationError);
    EXPECT_THROW(CorpusIndex("b", 3, {{"x", {}, v3}, {"y", {}, v2}}, ""), ValidationError);
}

TEST(IndexPages, BackendMismatchIsValidationError) {
    SyntheticEmbeddingBackend b;
    const auto idx = index_pages(corpus_images(fixtures::make_retrieval_corpus(2, 1)), b);
    EXPECT_NO_THROW(idx.require_backend(b.descriptor()));
    EXPECT_THROW(idx.require_backend({"other", 12, BackendKind::http}), ValidationError);
}

TEST(IndexCorpus, SaveLoadRoundTrip) {
    fixtures::TempDir dir("index");
    SyntheticEmbeddingBackend b;
    const auto corpus = fixtures::make_retrieval_corpus(4, 3);
    std::vector<PageSource> sources;
    std::filesystem::create_directories(dir.path() / "pages");
    for (std::size_t k = 0; k < corpus.size(); ++k) {
        const auto p = dir.path() / "pages" / ("p" + std::to_string(k) + ".png");
        save_png(corpus[k].page, p);
        sources.push_back({"p" + std::to_string(k), p});
    }
    const auto idx = index_corpus(sources, b);
    EXPECT_EQ(idx.built_at().size(), 20u);  // YYYY-MM-DDTHH:MM:SSZ
    idx.save(dir.path() / "index.json");
    const auto back = CorpusIndex::load(dir.path() / "index.json");
    ASSERT_EQ(back.size(), 4u);
    EXPECT_EQ(back.backend_id(), idx.backend_id());
    EXPECT_EQ(back.built_at(), idx.built_at());
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(back.entries()[k].vector, idx.entries()[k].vector);
        EXPECT_TRUE(std::filesystem::equivalent(back.entries()[k].path, sources[k].path));
    }
    const auto text = fixtures::read_text(dir.path() / "index.json");
    EXPECT_NE(text.find("\"pages/p0.png\""), std::string::npos);
    EXPECT_NE(text.find("\"format\": \"spotlight-index\""), std::string::npos);
}

TEST(IndexCorpus, EmptyCorpusAndMissingPage) {
    SyntheticEmbeddingBackend b;
    EXPECT_THROW(index_corpus({}, b), DomainError);
    const std::vector<PageSource> missing{{"m", "/nonexistent/m.png"}};
    EXPECT_THROW(index_corpus(missing, b), InputError);
}

TEST(IndexCorpus, LoadRejectsForeignFiles) {
    fixtures::TempDir dir("index-bad");
    fixtures::write_json(dir / "x.json", {{"format", "other"}});
    EXPECT_THROW(CorpusIndex::load(dir / "x.json"), ValidationError);
}

TEST(Retrieve, PlantedPageRanksFirst) {
    SyntheticEmbeddingBackend b;
    const auto corpus = fixtures::make_retrieval_corpus(30, 9);
    const auto idx = index_pages(corpus_images(corpus), b);
    for (std::size_t k = 0; k < corpus.size(); ++k) {
        const auto r = retrieve_topk(embed_text(b, clean_query(corpus[k].query)), idx, 3);
        ASSERT_EQ(r.ranked.size(), 3u);
        EXPECT_EQ(r.ranked[0].page_id, corpus[k].page.id());
        EXPECT_GE(r.ranked[0].score, r.ranked[1].score);
        EXPECT_GE(r.ranked[1].score, r.ranked[2].score);
    }
}

TEST(Retrieve, ScoresAreExactCosines) {
    SyntheticEmbeddingBackend b;
    const auto corpus = fixtures::make_retrieval_corpus(5, 2);
    const auto idx = index_pages(corpus_images(corpus), b);
    const auto q = embed_text(b, "crimson");
    for (const auto& r : retrieve_topk(q, idx, 5).ranked) EXPECT_EQ(r.score, cosine_sim(q, idx.find(r.page_id)->vector));
}

TEST(Retrieve, SingleAndOversizedK) {
    const EmbeddingVector v({1.0, 0.0});
    const CorpusIndex one("b", 2, {{"only", {}, v}}, "");
    const auto r = retrieve_topk(v, one, 1);
    ASSERT_EQ(r.ranked.size(), 1u);
    EXPECT_EQ(r.ranked[0].page_id, "only");
    const CorpusIndex two("b", 2, {{"z", {}, v}, {"a", {}, v}}, "");
    const auto all = retrieve_topk(v, two, 10);
    ASSERT_EQ(all.ranked.size(), 2u);
    EXPECT_EQ(all.ranked[0].page_id, "a");  // tie broken by id
    EXPECT_THROW(retrieve_topk(v, two, 0), DomainError);
}

TEST(Distractors, ZeroKeepsOrder) {
    const std::vector<std::string> rel{"r2", "r1"};
    const std::vector<std::string> pool{"p1", "p2"};
    EXPECT_EQ(inject_distractors(rel, pool, 0, 99), rel);
}

TEST(Distractors, SameSeedSameOrder) {
    const std::vector<std::string> rel{"r1", "r2"};
    const std::vector<std::string> pool{"p1", "p2", "p3", "p4", "p5"};
    EXPECT_EQ(inject_distractors(rel, pool, 3, 5), inject_distractors(rel, pool, 3, 5));
}

TEST(Distractors, ExhaustivePool) {
    const std::vector<std::string> rel{"r"};
    const std::vector<std::string> pool{"a", "b", "c"};
    const auto out = inject_distractors(rel, pool, 3, 11);
    EXPECT_EQ(out.size(), 4u);
    EXPECT_EQ(std::set<std::string>(out.begin(), out.end()), (std::set<std::string>{"r", "a", "b", "c"}));
}

TEST(Distractors, PinnedSequences) {
    // Reference values from an independent MT19937-64 + rejection sampling implementation.
    const std::vector<std::string> rel{"r1", "r2"};
    const std::vector<std::string> pool{"p1", "p2", "p3", "p4", "p5"};
    EXPECT_EQ(inject_distractors(rel, pool, 3, 42), (std::vector<std::string>{"p1", "r1", "p4", "r2", "p2"}));
    const std::vector<std::string> rel2{"a"};
    const std::vector<std::string> pool2{"x", "y", "z"};
    EXPECT_EQ(inject_distractors(rel2, pool2, 3, 7), (std::vector<std::string>{"z", "a", "x", "y"}));
}

TEST(Distractors, Errors) {
    const std::vector<std::string> rel{"r"};
    const std::vector<std::string> pool{"a"};
    EXPECT_THROW(inject_distractors(rel, pool, 2, 1), DomainError);
    const std::vector<std::string> overlapping{"r", "a"};
    EXPECT_THROW(inject_distractors(rel, overlapping, 1, 1), DomainError);
}

TEST(Distractors, NeverDropsOrDuplicates) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 300; ++t) {
        std::vector<std::string> rel, pool;
        const int nr = 1 + static_cast<int>(rng() % 4);
        const int np = static_cast<int>(rng() % 8);
        for (int k = 0; k < nr; ++k) rel.push_back("r" + std::to_string(k));
        for (int k = 0; k < np; ++k) pool.push_back("p" + std::to_string(k));
        const std::size_t m = np ? rng() % (np + 1) : 0;
        const auto out = inject_distractors(rel, pool, m, rng());
        EXPECT_EQ(out.size(), rel.size() + m);
        const std::set<std::string> uniq(out.begin(), out.end());
        EXPECT_EQ(uniq.size(), out.size());
        for (const auto& r : rel) EXPECT_TRUE(uniq.count(r));
    }
}

TEST(Fnv, KnownValues) {
    EXPECT_EQ(fnv1a64(""), 14695981039346656037ull);
    EXPECT_EQ(fnv1a64("q0001"), 12582182240724875887ull);
}
