#include <gtest/gtest.h>

#include <sstream>

#include "spotlight/cli.hpp"
#include "spotlight/harness.hpp"
#include "spotlight/image.hpp"
#include "synthetic_pages.hpp"

using namespace spotlight;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

// Fixture with `n` needle pages, dataset, oracle spec and config.
struct NeedleDir {
    fixtures::TempDir dir{"cli"};
    fs::path dataset;
    explicit NeedleDir(int n) {
        std::vector<fixtures::NeedleCase> cases;
        for (int s = 0; s < n; ++s) cases.push_back(fixtures::make_needle_case(100 + s));
        dataset = fixtures::write_needle_fixture(dir.path(), cases);
    }
    std::string config() const { return (dir / "config.json").string(); }
};

}  // namespace

TEST(Cli, HelpListsSubcommands) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, kExitOk);
    for (const char* sub : {"spot", "answer", "eval", "index", "occlude", "report", "SPOTLIGHT_CONFIG"}) {
        EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
    }
}

TEST(Cli, ParseErrorsExitTwo) {
    EXPECT_EQ(run({}).code, kExitConfig);
    EXPECT_EQ(run({"spot", "--bogus"}).code, kExitConfig);
    EXPECT_EQ(run({"frobnicate"}).code, kExitConfig);
    EXPECT_EQ(run({"spot", "a.png", "q", "-o", "x.png", "--grid", "0"}).code, kExitConfig);
}

TEST(Cli, SpotUniformPageIsByteCopy) {
    fixtures::TempDir dir("cli-spot");
    save_png(PageImage::filled("u", 60, 60, {200, 200, 200}), dir / "u.png");
    const auto r = run({"spot", (dir / "u.png").string(), "where is the crimson total", "-o", (dir / "o.png").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto line = json::parse(r.out);
    EXPECT_EQ(line["draw"], false);
    EXPECT_NEAR(line["p"].get<double>(), 1.0 / 36.0, 1e-12);
    EXPECT_EQ(fixtures::read_text(dir / "o.png"), fixtures::read_text(dir / "u.png"));
}

TEST(Cli, SpotNeedleDraws) {
    fixtures::TempDir dir("cli-needle");
    const auto c = fixtures::make_needle_case(17);
    save_png(c.page, dir / "n.png");
    const auto r = run({"spot", (dir / "n.png").string(), c.question, "-o", (dir / "o.png").string(), "--emit-debug",
                        (dir / "dbg.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto line = json::parse(r.out);
    EXPECT_EQ(line["draw"], true);
    EXPECT_EQ(line["i"], c.i);
    EXPECT_EQ(line["j"], c.j);
    const auto out = load_image(dir / "o.png");
    EXPECT_EQ(out.width(), c.page.width());
    EXPECT_FALSE(out == c.page.with_id(out.id()));
    const auto dbg = json::parse(fixtures::read_text(dir / "dbg.json"));
    EXPECT_EQ(dbg["sims"].size(), 36u);
}

TEST(Cli, MissingImageExitsFourNamingPath) {
    fixtures::TempDir dir("cli-missing");
    const auto missing = (dir / "nope.png").string();
    const auto r = run({"spot", missing, "q", "-o", (dir / "o.png").string()});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "o.png"));
}

TEST(Cli, EvalWritesReportsAndSpotlightBeatsBaseline) {
    NeedleDir f(6);
    const auto base_dir = (f.dir / "base").string();
    const auto spot_dir = (f.dir / "spot").string();
    const auto base = run({"--config", f.config(), "--json", "eval", f.dataset.string(), "-o", base_dir, "--pipeline", "baseline"});
    ASSERT_EQ(base.code, kExitOk) << base.err;
    const auto spot = run({"--config", f.config(), "--json", "eval", f.dataset.string(), "-o", spot_dir});
    ASSERT_EQ(spot.code, kExitOk) << spot.err;
    EXPECT_DOUBLE_EQ(json::parse(spot.out)["em"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(json::parse(base.out)["em"].get<double>(), 0.0);
    for (const char* name : {"report.md", "report.csv", "report.json", "run_stats.json"}) {
        EXPECT_TRUE(fs::exists(fs::path(spot_dir) / name)) << name;
    }
    const auto md = fixtures::read_text(fs::path(spot_dir) / "report.md");
    EXPECT_NE(md.find("| spotlight (closed) | 1.00 | 1.00 |"), std::string::npos) << md;
    const auto table = run({"--config", f.config(), "eval", f.dataset.string(), "-o", spot_dir});
    EXPECT_NE(table.out.find("em\t1.00\t1.00"), std::string::npos) << table.out;
}

TEST(Cli, EvalDeterministicReports) {
    NeedleDir f(4);
    const auto a = (f.dir / "a").string(), b = (f.dir / "b").string();
    ASSERT_EQ(run({"--config", f.config(), "eval", f.dataset.string(), "-o", a, "--parallelism", "3"}).code, kExitOk);
    ASSERT_EQ(run({"--config", f.config(), "eval", f.dataset.string(), "-o", b, "--parallelism", "3"}).code, kExitOk);
    for (const char* name : {"report.md", "report.csv", "report.json"}) {
        EXPECT_EQ(fixtures::read_text(fs::path(a) / name), fixtures::read_text(fs::path(b) / name)) << name;
    }
}

TEST(Cli, OpenSettingNeedsIndex) {
    NeedleDir f(2);
    const auto r = run({"--config", f.config(), "eval", f.dataset.string(), "-o", (f.dir / "o").string(), "--setting", "open"});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("index"), std::string::npos) << r.err;
}

TEST(Cli, IndexThenOpenEval) {
    NeedleDir f(5);
    const auto idx = (f.dir / "index.json").string();
    const auto ir = run({"--config", f.config(), "index", (f.dir / "pages").string(), "-o", idx});
    ASSERT_EQ(ir.code, kExitOk) << ir.err;
    EXPECT_EQ(json::parse(fixtures::read_text(idx))["entries"].size(), 5u);
    const auto r = run({"--config", f.config(), "--json", "eval", f.dataset.string(), "-o", (f.dir / "open").string(),
                        "--setting", "open", "--index", idx, "--k", "2"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto report = json::parse(fixtures::read_text(f.dir / "open/report.json"));
    for (const auto& row : report["rows"]) EXPECT_EQ(row["pages"].size(), 2u);
    EXPECT_EQ(report["config"]["setting"], "open");
    EXPECT_EQ(report["config"]["index"]["size"], 5);
}

TEST(Cli, ReportCsvReparsesToSameScores) {
    NeedleDir f(4);
    const auto out_dir = f.dir / "r";
    ASSERT_EQ(run({"--config", f.config(), "eval", f.dataset.string(), "-o", out_dir.string()}).code, kExitOk);
    const auto r = run({"report", (out_dir / "report.json").string(), "--format", "csv"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto csv = parse_report_csv(r.out);
    const auto from_json = report_from_json(json::parse(fixtures::read_text(out_dir / "report.json")));
    EXPECT_EQ(csv.scores.overall.em, from_json.scores.overall.em);
    EXPECT_EQ(csv.scores.overall.f1, from_json.scores.overall.f1);
    EXPECT_EQ(csv.questions.size(), from_json.rows.size());
    EXPECT_EQ(r.out, fixtures::read_text(out_dir / "report.csv"));
    EXPECT_EQ(run({"report", (out_dir / "report.json").string(), "--format", "xml"}).code, kExitConfig);
}

TEST(Cli, AnswerUsesConfiguredMock) {
    fixtures::TempDir dir("cli-answer");
    save_png(PageImage::filled("p", 20, 20, {1, 1, 1}), dir / "p.png");
    fixtures::write_json(dir / "cfg.json", {{"mllm", {{"kind", "mock"}, {"spec", {{"default", "Forty two."}}}}}});
    const auto r = run({"--config", (dir / "cfg.json").string(), "answer", (dir / "p.png").string(), "-q", "How many?"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, "Forty two.\n");
    fixtures::write_json(dir / "none.json", json::object());
    EXPECT_EQ(run({"--config", (dir / "none.json").string(), "answer", (dir / "p.png").string(), "-q", "x"}).code,
              kExitConfig);
}

TEST(Cli, OccludeConstantMockGivesZeroGrid) {
    fixtures::TempDir dir("cli-occ");
    save_png(fixtures::make_noise_page(3, 64, 64), dir / "p.png");
    fixtures::write_json(dir / "cfg.json", {{"mllm", {{"kind", "mock"}, {"spec", {{"default", "blue"}}}}}});
    const auto r = run({"--config", (dir / "cfg.json").string(), "occlude", (dir / "p.png").string(), "-q", "Colour?", "-a",
                        "blue", "-o", (dir / "heat.png").string(), "--grid-out", (dir / "grid.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto grid = json::parse(fixtures::read_text(dir / "grid.json"));
    for (const auto& row : grid["raw"]["values"])
        for (const auto& v : row) EXPECT_EQ(v.get<double>(), 0.0);
    EXPECT_EQ(load_image(dir / "heat.png").width(), 64);
    const auto strict = run({"--config", (dir / "cfg.json").string(), "occlude", (dir / "p.png").string(), "-q", "Colour?",
                             "-a", "blue", "-o", (dir / "h2.png").string(), "--no-fallback"});
    EXPECT_EQ(strict.code, kExitConfig);
}

TEST(Cli, BadConfigFileExitsTwo) {
    fixtures::TempDir dir("cli-badcfg");
    fixtures::write_json(dir / "cfg.json", {{"embeding", json::object()}});
    save_png(PageImage::filled("u", 12, 12, {0, 0, 0}), dir / "u.png");
    const auto r = run({"--config", (dir / "cfg.json").string(), "spot", (dir / "u.png").string(), "q", "-o",
                        (dir / "o.png").string()});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("embeding"), std::string::npos);
}
