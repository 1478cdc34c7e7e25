#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "spotlight/config.hpp"
#include "spotlight/error.hpp"
#include "spotlight/http_backends.hpp"
#include "spotlight/mock_backends.hpp"
#include "synthetic_pages.hpp"

using namespace spotlight;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
    return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
        auto it = vars.find(name);
        if (it == vars.end()) return std::nullopt;
        return it->second;
    };
}

}  // namespace

TEST(AppConfig, DefaultsWhenEmpty) {
    const auto c = parse_app_config(json::object(), "/base");
    EXPECT_EQ(c.embedding.kind, "synthetic");
    EXPECT_EQ(c.mllm.kind, "none");
    EXPECT_TRUE(c.cache_dir.empty());
    EXPECT_EQ(c.run.grid_n, 6);
    EXPECT_DOUBLE_EQ(c.run.alpha, 0.5);
}

TEST(AppConfig, ParsesSectionsAndResolvesPaths) {
    const json doc = {{"embedding", {{"kind", "http"}, {"url", "http://e"}, {"dim", 8}, {"backend_id", "enc"}}},
                      {"mllm", {{"kind", "mock"}, {"spec_file", "replies.json"}, {"model_id", "m1"}}},
                      {"run", {{"grid_n", 4}, {"seed", 11}, {"pipeline", "baseline"}}},
                      {"cache_dir", "cache"}};
    const auto c = parse_app_config(doc, "/cfg/dir");
    EXPECT_EQ(c.embedding.kind, "http");
    EXPECT_EQ(c.embedding.dim, 8u);
    EXPECT_EQ(c.mllm.spec_file, fs::path("/cfg/dir/replies.json"));
    EXPECT_EQ(c.cache_dir, fs::path("/cfg/dir/cache"));
    EXPECT_EQ(c.run.grid_n, 4);
    EXPECT_EQ(c.run.seed, 11u);
    EXPECT_EQ(c.run.pipeline, Pipeline::baseline);
    const auto back = parse_app_config(to_json(c), "/elsewhere");
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST(AppConfig, UnknownKeysRejected) {
    EXPECT_THROW(parse_app_config({{"embeding", json::object()}}, "."), ConfigError);
    EXPECT_THROW(parse_app_config({{"mllm", {{"knd", "mock"}}}}, "."), ConfigError);
    EXPECT_THROW(parse_app_config({{"run", {{"gridn", 3}}}}, "."), ConfigError);
    EXPECT_THROW(parse_app_config({{"embedding", {{"kind", "quantum"}}}}, "."), ConfigError);
    EXPECT_THROW(parse_app_config({{"embedding", {{"dim", "eight"}}}}, "."), ConfigError);
}

TEST(AppConfig, FileErrors) {
    fixtures::TempDir dir("cfg-err");
    EXPECT_THROW(load_app_config(dir / "missing.json"), ConfigError);
    std::ofstream(dir / "bad.json") << "{";
    EXPECT_THROW(load_app_config(dir / "bad.json"), ConfigError);
}

TEST(ResolveConfig, Precedence) {
    fixtures::TempDir dir("cfg-prec");
    fixtures::write_json(dir / "a.json", {{"run", {{"seed", 1}}}, {"cache_dir", "from-a"}});
    fixtures::write_json(dir / "b.json", {{"run", {{"seed", 2}}}});

    auto c = resolve_app_config(std::nullopt, fake_env({}));
    EXPECT_EQ(c.run.seed, 0u);

    c = resolve_app_config(std::nullopt, fake_env({{"SPOTLIGHT_CONFIG", (dir / "b.json").string()}}));
    EXPECT_EQ(c.run.seed, 2u);

    c = resolve_app_config(dir / "a.json", fake_env({{"SPOTLIGHT_CONFIG", (dir / "b.json").string()}}));
    EXPECT_EQ(c.run.seed, 1u);
    EXPECT_EQ(c.cache_dir, dir / "from-a");

    c = resolve_app_config(dir / "a.json", fake_env({{"SPOTLIGHT_SEED", "77"}, {"SPOTLIGHT_CACHE_DIR", "/tmp/cc"}}));
    EXPECT_EQ(c.run.seed, 77u);
    EXPECT_EQ(c.cache_dir, fs::path("/tmp/cc"));

    EXPECT_THROW(resolve_app_config(std::nullopt, fake_env({{"SPOTLIGHT_SEED", "7x"}})), ConfigError);
}

TEST(Factories, SyntheticEmbedding) {
    const auto b = make_embedding_backend(EmbeddingConfig{}, fake_env({}));
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(b->descriptor().backend_id, "synthetic-v1");
    EXPECT_EQ(b->descriptor().dim, 12u);
}

TEST(Factories, HttpEmbeddingNeedsToken) {
    EmbeddingConfig e;
    e.kind = "http";
    e.url = "http://127.0.0.1:1";
    e.dim = 4;
    e.auth_env = "SPOT_TEST_TOKEN";
    EXPECT_THROW(make_embedding_backend(e, fake_env({})), ConfigError);
    const auto b = make_embedding_backend(e, fake_env({{"SPOT_TEST_TOKEN", "secret"}}));
    EXPECT_EQ(b->descriptor().kind, BackendKind::http);
    EXPECT_EQ(b->descriptor().dim, 4u);
    e.dim = 0;
    EXPECT_THROW(make_embedding_backend(e, fake_env({{"SPOT_TEST_TOKEN", "secret"}})), ConfigError);
}

TEST(Factories, MllmKinds) {
    fixtures::TempDir dir("cfg-mllm");
    MllmConfig m;
    EXPECT_EQ(make_mllm_backend(m, dir.path(), fake_env({})), nullptr);

    m.kind = "mock";
    EXPECT_THROW(make_mllm_backend(m, dir.path(), fake_env({})), ConfigError);
    m.spec = {{"default", "hi"}};
    auto mock = make_mllm_backend(m, dir.path(), fake_env({}));
    ASSERT_NE(mock, nullptr);
    EXPECT_EQ(mock->complete({.prompt = "x"}).text, "hi");

    fixtures::write_json(dir / "spec.json", {{"default", "from file"}});
    m.spec = nullptr;
    m.spec_file = dir / "spec.json";
    EXPECT_EQ(make_mllm_backend(m, dir.path(), fake_env({}))->complete({.prompt = "x"}).text, "from file");

    m = MllmConfig{};
    m.kind = "http";
    m.url = "http://127.0.0.1:1";
    EXPECT_THROW(make_mllm_backend(m, dir.path(), fake_env({})), ConfigError);  // no model id
    m.model_id = "gpt";
    m.auth_env = "NOPE";
    EXPECT_THROW(make_mllm_backend(m, dir.path(), fake_env({})), ConfigError);
    EXPECT_NE(make_mllm_backend(m, dir.path(), fake_env({{"NOPE", "t"}})), nullptr);
}

TEST(Factories, RegionMock) {
    fixtures::TempDir dir("cfg-region");
    save_png(PageImage::filled("r", 20, 20, {9, 9, 9}), dir / "ref.png");
    MllmConfig m;
    m.kind = "region_mock";
    m.spec = {{"reference", "ref.png"}, {"region", {0, 0, 10, 10}}, {"answer", "yes"}};
    auto b = make_mllm_backend(m, dir.path(), fake_env({}));
    auto* region = dynamic_cast<RegionSensitiveMllm*>(b.get());
    ASSERT_NE(region, nullptr);
    EXPECT_NEAR(region->probability_for(PageImage::filled("r", 20, 20, {9, 9, 9})), 0.9, 1e-12);
    m.spec["region"] = {0, 0, 10};
    EXPECT_THROW(make_mllm_backend(m, dir.path(), fake_env({})), ConfigError);
    m.spec = {{"reference", "absent.png"}, {"region", {0, 0, 10, 10}}, {"answer", "yes"}};
    EXPECT_THROW(make_mllm_backend(m, dir.path(), fake_env({})), ConfigError);
}

TEST(Factories, UpliftOracleFromFixture) {
    fixtures::TempDir dir("cfg-uplift");
    const auto c = fixtures::make_needle_case(3);
    fixtures::write_needle_fixture(dir.path(), {c});
    const auto app = load_app_config(dir / "config.json");
    EXPECT_EQ(app.mllm.kind, "uplift_oracle");
    EXPECT_EQ(app.run.seed, 7u);
    auto b = make_mllm_backend(app.mllm, app.base_dir, fake_env({}));
    ASSERT_NE(b, nullptr);
    MllmRequest req{.prompt = build_prompt(c.question, PromptMode::baseline)};
    req.images.push_back(encode_png(c.page));
    EXPECT_EQ(b->complete(req).text, std::string(kUnanswerablePhrase));
}

TEST(AppConfig, NestedRunKeysChecked) {
    EXPECT_THROW(parse_app_config({{"run", {{"sigma", {{"mx", 1.0}}}}}}, "."), ConfigError);
    EXPECT_THROW(parse_app_config({{"run", {{"retry", {{"tries", 2}}}}}}, "."), ConfigError);
    EXPECT_NO_THROW(parse_app_config({{"run", {{"retry", {{"attempts", 2}}}}}}, "."));
}
