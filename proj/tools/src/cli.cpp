#include "spotlight/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spotlight/cache.hpp"
#include "spotlight/config.hpp"
#include "spotlight/error.hpp"
#include "spotlight/harness.hpp"
#include "spotlight/occlusion.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFooter = R"(EXIT STATUS
  0  success
  2  configuration error (bad flags, bad config file, missing backend or index)
  3  backend error (transport failure after retries, contract violation)
  4  input error (unreadable image, invalid dataset, domain violation)

ENVIRONMENT
  SPOTLIGHT_CONFIG     config file used when --config is absent
  SPOTLIGHT_CACHE_DIR  cache directory (overridden by --cache-dir)
  SPOTLIGHT_SEED       distractor seed (overridden by --seed)
  Backend auth tokens are read from the variables named by "auth_env" in the config.

Precedence: flags > environment > config file > built-in defaults.)";

struct Globals {
    std::string config;
    std::string cache_dir;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    bool json = false;
};

struct RunFlags {
    std::optional<std::string> setting;
    std::optional<std::string> pipeline;
    std::optional<int> grid;
    std::optional<double> alpha;
    std::optional<std::string> highlight;
    std::optional<std::size_t> k;
    std::optional<std::size_t> m;
    std::optional<std::size_t> parallelism;
    std::optional<std::string> clean;
};

void add_run_flags(CLI::App* sub, RunFlags& f, bool with_eval_flags) {
    sub->add_option("--grid", f.grid, "grid side n (n x n patches)")->check(CLI::Range(1, 64));
    sub->add_option("--alpha", f.alpha, "highlight opacity in [0, 1]")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--highlight", f.highlight, "highlight colour as r,g,b");
    sub->add_option("--clean", f.clean, "query cleaning: rule_based or llm");
    if (!with_eval_flags) return;
    sub->add_option("--setting", f.setting, "closed, open or distractor");
    sub->add_option("--pipeline", f.pipeline, "baseline, spotlight, ocr_stub or cot");
    sub->add_option("--k", f.k, "retrieval depth for the open setting")->check(CLI::PositiveNumber);
    sub->add_option("--m", f.m, "distractors per question");
    sub->add_option("--parallelism", f.parallelism, "questions in flight")->check(CLI::PositiveNumber);
}

Rgb8 parse_rgb(const std::string& s) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            const int c = std::stoi(part, &used);
            if (used != part.size() || c < 0 || c > 255) throw std::out_of_range("channel");
            v.push_back(c);
        } catch (const std::exception&) {
            throw ConfigError("--highlight expects r,g,b with channels in 0..255, got '" + s + "'");
        }
    }
    if (v.size() != 3) throw ConfigError("--highlight expects r,g,b, got '" + s + "'");
    return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
}

void apply_run_flags(RunConfig& run, const RunFlags& f) {
    if (f.setting) run.setting = parse_setting(*f.setting);
    if (f.pipeline) run.pipeline = parse_pipeline(*f.pipeline);
    if (f.grid) run.grid_n = *f.grid;
    if (f.alpha) run.alpha = *f.alpha;
    if (f.highlight) run.highlight = parse_rgb(*f.highlight);
    if (f.k) run.k = *f.k;
    if (f.m) run.m = *f.m;
    if (f.parallelism) run.parallelism = *f.parallelism;
    if (f.clean) {
        if (*f.clean == "llm") run.clean_mode = CleanMode::llm;
        else if (*f.clean == "rule_based") run.clean_mode = CleanMode::rule_based;
        else throw ConfigError("--clean must be rule_based or llm");
    }
}

/// Everything a subcommand needs, resolved once with the documented precedence.
struct Context {
    AppConfig app;
    std::unique_ptr<ContentCache> cache;
    std::unique_ptr<EmbeddingBackend> embedding_raw;
    std::optional<CachedEmbeddingBackend> embedding_cached;
    std::unique_ptr<MllmBackend> mllm;

    EmbeddingBackend& embedding() {
        if (embedding_cached) return *embedding_cached;
        return *embedding_raw;
    }
    MllmBackend& require_mllm() {
        if (!mllm) throw ConfigError("this command needs an MLLM backend; set \"mllm\" in the config file");
        return *mllm;
    }
    ContentCache* cache_ptr() { return cache ? cache.get() : nullptr; }
};

void init_context(Context& ctx, const Globals& g, const RunFlags* flags, bool want_embedding, bool want_mllm) {
    ctx.app = resolve_app_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config));
    if (!g.cache_dir.empty()) ctx.app.cache_dir = g.cache_dir;
    if (g.seed) ctx.app.run.seed = *g.seed;
    if (flags) apply_run_flags(ctx.app.run, *flags);
    if (!ctx.app.cache_dir.empty()) ctx.cache = std::make_unique<ContentCache>(ctx.app.cache_dir);
    if (want_embedding) {
        ctx.embedding_raw = make_embedding_backend(ctx.app.embedding);
        if (ctx.cache) ctx.embedding_cached.emplace(*ctx.embedding_raw, *ctx.cache);
    }
    if (want_mllm) ctx.mllm = make_mllm_backend(ctx.app.mllm, ctx.app.base_dir);
}

SpotlightConfig spotlight_config(const RunConfig& run, MllmBackend* cleaner) {
    SpotlightConfig sc;
    sc.grid = GridSpec(run.grid_n);
    sc.style = {run.highlight, run.alpha};
    sc.sigma = run.sigma;
    sc.clean_mode = run.clean_mode;
    sc.cleaner = cleaner;
    sc.max_in_flight = run.max_in_flight;
    return sc;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void log(const Globals& g, std::ostream& err, const std::string& msg) {
    if (g.verbose) err << "[spotlight] " << msg << "\n";
}

fs::path require_file(const std::string& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw InputError("cannot read file: " + p);
    return p;
}

// ---------------------------------------------------------------------------------------------

struct SpotArgs {
    std::string image;
    std::string query;
    std::string out;
    std::string debug;
    RunFlags run;
};

int cmd_spot(const Globals& g, const SpotArgs& a, std::ostream& out, std::ostream& err) {
    const fs::path path = require_file(a.image);
    const auto bytes = read_file_bytes(path);
    const PageImage page = decode_image(bytes, path.string());
    if (text::trim(a.query).empty()) throw DomainError("query must not be empty");

    Context ctx;
    init_context(ctx, g, &a.run, true, a.run.clean && *a.run.clean == "llm");
    const SpotlightConfig sc = spotlight_config(ctx.app.run, ctx.mllm.get());
    const SpotlightResult r = spotlight(page, a.query, ctx.embedding(), sc);
    log(g, err, "select " + fixed2(r.select_ms) + " ms, mask " + fixed2(r.mask_ms) + " ms");

    if (!r.params.draw && sniff_format(bytes) == ImageFormat::png) {
        write_file_atomic(a.out, bytes);
    } else {
        write_file_atomic(a.out, encode_png(r.attended.image));
    }

    const json line = {{"i", r.selection.i_star}, {"j", r.selection.j_star}, {"p", r.selection.p},
                       {"sigma", r.params.sigma}, {"draw", r.params.draw}};
    if (!a.debug.empty()) {
        json dbg = line;
        dbg["image"] = a.image;
        dbg["query"] = a.query;
        dbg["cleaned_query"] = r.cleaned_query;
        dbg["n"] = r.selection.n;
        dbg["center"] = {r.selection.center.xn, r.selection.center.yn};
        dbg["sims"] = r.selection.sims;
        dbg["backend_id"] = ctx.embedding().descriptor().backend_id;
        write_file_atomic(a.debug, dbg.dump(2) + "\n");
    }
    out << line.dump() << "\n";
    return kExitOk;
}

struct AnswerArgs {
    std::vector<std::string> images;
    std::string question;
    RunFlags run;
};

int cmd_answer(const Globals& g, const AnswerArgs& a, std::ostream& out, std::ostream& err) {
    std::vector<PageImage> pages;
    for (const auto& p : a.images) pages.push_back(load_image(require_file(p)));
    if (text::trim(a.question).empty()) throw DomainError("question must not be empty");

    const Pipeline pipeline = a.run.pipeline ? parse_pipeline(*a.run.pipeline) : Pipeline::baseline;
    if (pipeline == Pipeline::ocr_stub) throw ConfigError("answer supports baseline, spotlight and cot");
    Context ctx;
    init_context(ctx, g, &a.run, pipeline == Pipeline::spotlight, true);
    MllmBackend& mllm = ctx.require_mllm();

    MllmRequest req;
    req.model_id = mllm.descriptor().model_id;
    req.max_tokens = ctx.app.run.max_tokens;
    req.temperature = ctx.app.run.temperature;
    const PromptMode mode = pipeline == Pipeline::spotlight ? PromptMode::spotlight
                            : pipeline == Pipeline::cot     ? PromptMode::cot
                                                            : PromptMode::baseline;
    req.prompt = build_prompt(a.question, mode);
    json selections = json::array();
    for (const auto& page : pages) {
        if (pipeline == Pipeline::spotlight) {
            const auto r = spotlight(page, a.question, ctx.embedding(), spotlight_config(ctx.app.run, ctx.mllm.get()));
            selections.push_back({{"i", r.selection.i_star}, {"j", r.selection.j_star}, {"p", r.selection.p},
                                  {"sigma", r.params.sigma}, {"draw", r.params.draw}});
            req.images.push_back(encode_png(r.attended.image));
        } else {
            req.images.push_back(encode_png(page));
        }
    }
    const Answer ans = ask(mllm, req, ctx.cache_ptr(), ctx.app.run.retry);
    log(g, err, "ask " + fixed2(ans.latency_ms) + " ms, attempts " + std::to_string(ans.attempts));
    const std::string answer = pipeline == Pipeline::cot ? extract_cot_answer(ans.raw) : ans.raw;
    if (g.json) {
        json j = {{"answer", answer}, {"normalized", normalize_answer_string(answer)}, {"raw", ans.raw},
                  {"cache_hit", ans.cache_hit}, {"attempts", ans.attempts}};
        if (pipeline == Pipeline::spotlight) j["selections"] = std::move(selections);
        out << j.dump() << "\n";
    } else {
        out << answer << "\n";
    }
    return kExitOk;
}

struct EvalArgs {
    std::string dataset;
    std::string out_dir;
    std::string index;
    RunFlags run;
};

std::string summary_table(const EvalReport& r) {
    std::ostringstream s;
    s << "metric";
    for (const auto& [domain, _] : r.scores.per_domain) s << "\t" << domain;
    s << "\tall\n";
    auto line = [&](const char* name, auto get) {
        s << name;
        for (const auto& [_, m] : r.scores.per_domain) s << "\t" << get(m);
        s << "\t" << get(r.scores.overall) << "\n";
    };
    line("em", [](const MetricMeans& m) { return fixed2(m.em); });
    line("f1", [](const MetricMeans& m) { return fixed2(m.f1); });
    line("anls", [](const MetricMeans& m) { return fixed2(m.anls); });
    if (r.scores.overall.acc) line("acc", [](const MetricMeans& m) { return m.acc ? fixed2(*m.acc) : std::string("-"); });
    line("n", [](const MetricMeans& m) { return std::to_string(m.count); });
    return s.str();
}

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
    Context ctx;
    init_context(ctx, g, &a.run, true, true);
    const RunConfig& run = ctx.app.run;
    std::optional<CorpusIndex> index;
    if (!a.index.empty()) {
        index = CorpusIndex::load(require_file(a.index));
    } else if (run.setting != Setting::closed) {
        throw ConfigError(std::string(to_string(run.setting)) + " setting requires --index");
    }
    const Dataset ds = load_dataset(require_file(a.dataset));
    log(g, err, "loaded " + std::to_string(ds.records.size()) + " records");

    EvalBackends backends;
    backends.embedding = ctx.embedding_raw.get();
    backends.mllm = ctx.mllm.get();
    backends.index = index ? &*index : nullptr;
    backends.cache = ctx.cache_ptr();
    EvalReport report = run_eval(ds, run, backends);
    const json resolved = to_json(ctx.app);
    report.config["backends"] = {{"embedding", resolved["embedding"]}, {"mllm", resolved["mllm"]}};

    const fs::path dir = a.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
    const RenderOptions files{false};
    write_file_atomic(dir / "report.md", render_report(report, ReportFormat::markdown, files));
    write_file_atomic(dir / "report.csv", render_report(report, ReportFormat::csv, files));
    write_file_atomic(dir / "report.json", render_report(report, ReportFormat::json, files));
    write_file_atomic(dir / "run_stats.json", run_stats_json(report).dump(2) + "\n");

    if (g.json) {
        out << json{{"em", report.scores.overall.em},
                    {"f1", report.scores.overall.f1},
                    {"anls", report.scores.overall.anls},
                    {"count", report.scores.overall.count},
                    {"out_dir", dir.string()}}
                   .dump()
            << "\n";
    } else {
        out << summary_table(report);
    }
    return kExitOk;
}

struct IndexArgs {
    std::vector<std::string> inputs;
    std::string out;
};

std::vector<PageSource> collect_pages(const std::vector<std::string>& inputs) {
    std::vector<PageSource> pages;
    auto add = [&](const fs::path& p) { pages.push_back({p.lexically_normal().generic_string(), p}); };
    for (const auto& in : inputs) {
        std::error_code ec;
        if (fs::is_directory(in, ec)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(in)) {
                if (!e.is_regular_file()) continue;
                auto ext = e.path().extension().string();
                std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
                if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            for (const auto& f : found) add(f);
        } else {
            add(require_file(in));
        }
    }
    if (pages.empty()) throw InputError("no page images found to index");
    return pages;
}

int cmd_index(const Globals& g, const IndexArgs& a, std::ostream& out, std::ostream& err) {
    Context ctx;
    init_context(ctx, g, nullptr, true, false);
    const auto pages = collect_pages(a.inputs);
    const CorpusIndex index = index_corpus(pages, ctx.embedding(), ctx.app.run.max_in_flight);
    index.save(a.out);
    log(g, err, "indexed " + std::to_string(index.size()) + " pages");
    if (g.json) {
        out << json{{"pages", index.size()}, {"backend_id", index.backend_id()}, {"out", a.out}}.dump() << "\n";
    } else {
        out << "indexed " << index.size() << " pages with " << index.backend_id() << " -> " << a.out << "\n";
    }
    return kExitOk;
}

struct OccludeArgs {
    std::string image;
    std::string question;
    std::string answer;
    std::string out;
    std::string grid_out;
    int window = 32;
    int stride = 16;
    std::string fill = "128,128,128";
    double smooth_sigma = 1.0;
    std::size_t parallelism = 1;
    bool no_fallback = false;
};

int cmd_occlude(const Globals& g, const OccludeArgs& a, std::ostream& out, std::ostream& err) {
    const PageImage page = load_image(require_file(a.image));
    Context ctx;
    init_context(ctx, g, nullptr, false, true);
    MllmBackend& mllm = ctx.require_mllm();
    OcclusionConfig cfg;
    cfg.window = a.window;
    cfg.stride = a.stride;
    cfg.fill = parse_rgb(a.fill);
    cfg.smooth_sigma = a.smooth_sigma;
    cfg.parallelism = a.parallelism;
    cfg.allow_fallback = !a.no_fallback;
    validate(cfg, page.width(), page.height());

    const SensitivityGrid raw = occlusion_sweep(page, a.question, a.answer, mllm, cfg);
    const SmoothedHeatmap heat = smooth_heatmap(raw, page, cfg.smooth_sigma);
    write_file_atomic(a.out, encode_png(heat.overlay));
    if (!a.grid_out.empty()) {
        const json dump = {{"raw", to_json(raw)}, {"smoothed", to_json(heat.grid)}, {"smooth_sigma", cfg.smooth_sigma}};
        write_file_atomic(a.grid_out, dump.dump(2) + "\n");
    }
    log(g, err, "swept " + std::to_string(raw.rows * raw.cols) + " windows");
    const auto [lo, hi] = std::minmax_element(raw.values.begin(), raw.values.end());
    const json line = {{"rows", raw.rows}, {"cols", raw.cols}, {"p_orig", raw.p_orig}, {"min", *lo}, {"max", *hi}};
    if (g.json) {
        out << line.dump() << "\n";
    } else {
        out << "grid " << raw.rows << "x" << raw.cols << ", p_orig " << fixed2(raw.p_orig) << ", sensitivity "
            << fixed2(*lo) << ".." << fixed2(*hi) << "\n";
    }
    return kExitOk;
}

struct ReportArgs {
    std::string input;
    std::string format = "md";
    std::string out;
    bool runtime = false;
};

int cmd_report(const Globals&, const ReportArgs& a, std::ostream& out, std::ostream&) {
    const auto bytes = read_file_bytes(require_file(a.input));
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw InputError(a.input + " is not valid JSON: " + e.what());
    }
    const EvalReport report = report_from_json(doc);
    const std::string text = render_report(report, parse_report_format(a.format), RenderOptions{a.runtime});
    if (a.out.empty()) {
        out << text;
    } else {
        write_file_atomic(a.out, text);
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Query-guided highlighting for document visual question answering.", "spotlight"};
    app.footer(kFooter);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "JSON config file (else $SPOTLIGHT_CONFIG)");
    app.add_option("--cache-dir", g.cache_dir, "content-addressed response cache directory");
    app.add_option("--seed", g.seed, "seed for distractor sampling");
    app.add_flag("--verbose,-v", g.verbose, "stage timings on standard error");
    app.add_flag("--json", g.json, "machine-readable JSON lines on standard output");

    SpotArgs spot;
    auto* s = app.add_subcommand("spot", "highlight the patch of IMAGE most relevant to QUERY");
    s->add_option("image", spot.image, "page image (PNG or JPEG)")->required();
    s->add_option("query", spot.query, "question text")->required();
    s->add_option("--out,-o", spot.out, "attended PNG to write")->required();
    s->add_option("--emit-debug", spot.debug, "write selection details (similarities, centre) as JSON");
    add_run_flags(s, spot.run, false);
    s->footer("Prints {\"i\",\"j\",\"p\",\"sigma\",\"draw\"} as one JSON line. When nothing is drawn and the input\n"
              "is a PNG, the output file is a byte copy of the input.");

    AnswerArgs ans;
    auto* an = app.add_subcommand("answer", "ask the configured MLLM a question about page images");
    an->add_option("images", ans.images, "page images, in order")->required();
    an->add_option("--question,-q", ans.question, "question text")->required();
    an->add_option("--pipeline", ans.run.pipeline, "baseline (default), spotlight or cot");
    add_run_flags(an, ans.run, false);

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "score a dataset and write report.md, report.csv, report.json");
    e->add_option("dataset", ev.dataset, "dataset JSON file")->required();
    e->add_option("--out-dir,-o", ev.out_dir, "directory for report files")->required();
    e->add_option("--index", ev.index, "corpus index (required for open and distractor settings)");
    add_run_flags(e, ev.run, true);
    e->footer("Report files omit timings so identical runs are byte-identical; timings and the cache-hit\n"
              "ratio go to run_stats.json.");

    IndexArgs ix;
    auto* i = app.add_subcommand("index", "embed page images into a corpus index");
    i->add_option("inputs", ix.inputs, "page images or directories (searched for .png/.jpg)")->required();
    i->add_option("--out,-o", ix.out, "index JSON to write")->required();

    OccludeArgs oc;
    auto* o = app.add_subcommand("occlude", "occlusion sensitivity map for a question and reference answer");
    o->add_option("image", oc.image, "page image")->required();
    o->add_option("--question,-q", oc.question, "question text")->required();
    o->add_option("--answer,-a", oc.answer, "reference answer whose probability is tracked")->required();
    o->add_option("--out,-o", oc.out, "heatmap overlay PNG to write")->required();
    o->add_option("--grid-out", oc.grid_out, "raw and smoothed sensitivity grids as JSON");
    o->add_option("--window", oc.window, "occluder side in pixels")->capture_default_str();
    o->add_option("--stride", oc.stride, "step between windows in pixels")->capture_default_str();
    o->add_option("--fill", oc.fill, "occluder colour r,g,b")->capture_default_str();
    o->add_option("--smooth-sigma", oc.smooth_sigma, "Gaussian smoothing in cells (0 disables)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    o->add_option("--parallelism", oc.parallelism, "windows in flight")->check(CLI::PositiveNumber);
    o->add_flag("--no-fallback", oc.no_fallback, "fail instead of using answer matching when logits are missing");

    ReportArgs rp;
    auto* r = app.add_subcommand("report", "re-render a report.json as markdown, CSV or JSON");
    r->add_option("report", rp.input, "report.json written by eval")->required();
    r->add_option("--format,-f", rp.format, "md, csv or json")->capture_default_str();
    r->add_option("--out,-o", rp.out, "write here instead of standard output");
    r->add_flag("--with-runtime", rp.runtime, "include latency and cache figures when present");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kExitConfig;
    }

    try {
        if (s->parsed()) return cmd_spot(g, spot, out, err);
        if (an->parsed()) return cmd_answer(g, ans, out, err);
        if (e->parsed()) return cmd_eval(g, ev, out, err);
        if (i->parsed()) return cmd_index(g, ix, out, err);
        if (o->parsed()) return cmd_occlude(g, oc, out, err);
        if (r->parsed()) return cmd_report(g, rp, out, err);
    } catch (const ConfigError& ex) {
        err << "spotlight: configuration error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const BackendError& ex) {
        err << "spotlight: backend error after " << ex.attempts() << " attempt(s): " << ex.what() << "\n";
        return kExitBackend;
    } catch (const ContractError& ex) {
        err << "spotlight: backend contract violation: " << ex.what() << "\n";
        return kExitBackend;
    } catch (const Error& ex) {
        err << "spotlight: " << ex.what() << "\n";
        return kExitInput;
    } catch (const std::exception& ex) {
        err << "spotlight: internal error: " << ex.what() << "\n";
        return 1;
    }
    return kExitConfig;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"spotlight"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace spotlight
