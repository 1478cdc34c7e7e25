#include "spotlight/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include "spotlight/cache.hpp"
#include "spotlight/error.hpp"
#include "spotlight/parallel.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

using nlohmann::json;

std::string_view to_string(Category c) noexcept {
    switch (c) {
        case Category::inline_detail: return "inline";
        case Category::boolean: return "boolean";
        case Category::comparative: return "comparative";
        case Category::reasoning: return "reasoning";
        case Category::commonsense: return "commonsense";
        case Category::unanswerable: return "unanswerable";
    }
    return "inline";
}

std::optional<Category> parse_category(std::string_view s) noexcept {
    if (s == "inline") return Category::inline_detail;
    if (s == "boolean") return Category::boolean;
    if (s == "comparative") return Category::comparative;
    if (s == "reasoning") return Category::reasoning;
    if (s == "commonsense") return Category::commonsense;
    if (s == "unanswerable") return Category::unanswerable;
    return std::nullopt;
}

std::string_view to_string(Setting s) noexcept {
    switch (s) {
        case Setting::closed: return "closed";
        case Setting::open: return "open";
        case Setting::distractor: return "distractor";
    }
    return "closed";
}

std::string_view to_string(Pipeline p) noexcept {
    switch (p) {
        case Pipeline::baseline: return "baseline";
        case Pipeline::spotlight: return "spotlight";
        case Pipeline::ocr_stub: return "ocr_stub";
        case Pipeline::cot: return "cot";
    }
    return "baseline";
}

Setting parse_setting(std::string_view s) {
    if (s == "closed") return Setting::closed;
    if (s == "open") return Setting::open;
    if (s == "distractor") return Setting::distractor;
    throw ConfigError("unknown setting '" + std::string(s) + "' (closed, open, distractor)");
}

Pipeline parse_pipeline(std::string_view s) {
    if (s == "baseline") return Pipeline::baseline;
    if (s == "spotlight") return Pipeline::spotlight;
    if (s == "ocr_stub" || s == "ocr") return Pipeline::ocr_stub;
    if (s == "cot") return Pipeline::cot;
    throw ConfigError("unknown pipeline '" + std::string(s) + "' (baseline, spotlight, ocr_stub, cot)");
}

// ---------------------------------------------------------------------------------------------
// Dataset loading

namespace {

class Problems {
public:
    void add(const std::string& qid, const std::string& path, const std::string& msg) {
        lines_.push_back("qid=" + (qid.empty() ? std::string("?") : qid) + " " + path + ": " + msg);
    }
    bool empty() const { return lines_.empty(); }
    std::string str() const { return text::join(lines_, "\n"); }

private:
    std::vector<std::string> lines_;
};

std::optional<std::string> string_field(const json& rec, const char* key, const std::string& qid,
                                        const std::string& at, Problems& problems, bool required = true) {
    if (!rec.contains(key)) {
        if (required) problems.add(qid, at + "." + key, "missing required field");
        return std::nullopt;
    }
    if (!rec[key].is_string()) {
        problems.add(qid, at + "." + key, "must be a string");
        return std::nullopt;
    }
    return rec[key].get<std::string>();
}

}  // namespace

Dataset parse_dataset(const json& doc, const std::filesystem::path& base_dir) {
    Problems problems;
    if (!doc.is_object()) throw ValidationError("dataset root must be a JSON object");
    if (doc.value("schema", "") != kDatasetSchema) {
        problems.add("", "$.schema", "must be \"" + std::string(kDatasetSchema) + "\"");
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"].get<int>() != kDatasetSchemaVersion) {
        problems.add("", "$.version", "must be " + std::to_string(kDatasetSchemaVersion));
    }
    if (!doc.contains("records") || !doc["records"].is_array()) {
        problems.add("", "$.records", "must be an array");
        throw ValidationError("dataset validation failed:\n" + problems.str());
    }

    Dataset ds;
    ds.base_dir = base_dir;
    std::set<std::string> seen;
    const auto& records = doc["records"];
    for (std::size_t r = 0; r < records.size(); ++r) {
        const std::string at = "$.records[" + std::to_string(r) + "]";
        const json& rec = records[r];
        if (!rec.is_object()) {
            problems.add("", at, "must be an object");
            continue;
        }
        QARecord q;
        const std::string qid = rec.contains("qid") && rec["qid"].is_string() ? rec["qid"].get<std::string>() : "";
        if (qid.empty()) problems.add("", at + ".qid", "missing or empty");
        if (!qid.empty() && !seen.insert(qid).second) problems.add(qid, at + ".qid", "duplicate qid");
        q.qid = qid;

        if (auto s = string_field(rec, "question", qid, at, problems)) {
            if (text::trim(*s).empty()) problems.add(qid, at + ".question", "must not be empty");
            q.question = *s;
        }
        if (!rec.contains("answers") || !rec["answers"].is_array() || rec["answers"].empty()) {
            problems.add(qid, at + ".answers", "must be a nonempty array of strings");
        } else {
            for (std::size_t a = 0; a < rec["answers"].size(); ++a) {
                if (!rec["answers"][a].is_string()) {
                    problems.add(qid, at + ".answers[" + std::to_string(a) + "]", "must be a string");
                } else {
                    q.answers.push_back(rec["answers"][a].get<std::string>());
                }
            }
        }
        if (auto s = string_field(rec, "category", qid, at, problems)) {
            if (auto c = parse_category(*s)) {
                q.category = *c;
            } else {
                problems.add(qid, at + ".category", "unknown category '" + *s + "'");
            }
        }
        if (auto s = string_field(rec, "domain", qid, at, problems)) {
            if (s->empty()) problems.add(qid, at + ".domain", "must not be empty");
            q.domain = *s;
        }
        if (auto s = string_field(rec, "doc_id", qid, at, problems)) q.doc_id = *s;

        if (!rec.contains("pages") || !rec["pages"].is_array() || rec["pages"].empty()) {
            problems.add(qid, at + ".pages", "must contain at least one page");
        } else {
            for (std::size_t p = 0; p < rec["pages"].size(); ++p) {
                const std::string pat = at + ".pages[" + std::to_string(p) + "]";
                if (!rec["pages"][p].is_string()) {
                    problems.add(qid, pat, "must be a string path");
                    continue;
                }
                std::filesystem::path page = rec["pages"][p].get<std::string>();
                if (page.is_relative()) page = base_dir / page;
                page = page.lexically_normal();
                if (!std::filesystem::is_regular_file(page)) problems.add(qid, pat, "page not found: " + page.string());
                q.pages.push_back(std::move(page));
            }
        }

        if (q.category == Category::unanswerable) {
            for (const auto& g : q.answers) {
                if (normalize_answer(g) != std::vector<std::string>{std::string(kUnanswerableToken)}) {
                    problems.add(qid, at + ".answers", "unanswerable records must use the gold \"" +
                                                           std::string(kUnanswerablePhrase) + "\", got \"" + g + "\"");
                    break;
                }
            }
        }

        if (rec.contains("choices")) {
            const json& ch = rec["choices"];
            if (!ch.is_array() || ch.size() < 2 || ch.size() > 4) {
                problems.add(qid, at + ".choices", "must be an array of 2-4 option strings");
            } else {
                std::vector<std::string> choices;
                for (const auto& c : ch) choices.push_back(c.is_string() ? c.get<std::string>() : std::string());
                q.choices = std::move(choices);
                const std::string label = q.answers.empty() ? "" : text::trim(q.answers.front());
                const bool ok = label.size() == 1 && label[0] >= 'A' && label[0] < static_cast<char>('A' + ch.size());
                if (!ok) problems.add(qid, at + ".answers[0]", "MCQ gold must be an option label A-" +
                                                                  std::string(1, static_cast<char>('A' + ch.size() - 1)));
            }
        }

        if (rec.contains("evidence_bbox")) {
            const json& bb = rec["evidence_bbox"];
            const std::string bat = at + ".evidence_bbox";
            bool shape_ok = bb.is_object();
            for (const char* key : {"page_index", "x", "y", "w", "h"}) {
                if (!shape_ok || !bb.contains(key) || !bb[key].is_number_integer()) {
                    problems.add(qid, bat + "." + key, "must be an integer");
                    shape_ok = false;
                }
            }
            if (shape_ok) {
                EvidenceBox box{bb["page_index"].get<int>(), bb["x"].get<int>(), bb["y"].get<int>(), bb["w"].get<int>(),
                                bb["h"].get<int>()};
                if (box.page_index < 0 || box.page_index >= static_cast<int>(q.pages.size())) {
                    problems.add(qid, bat + ".page_index", "out of range");
                } else if (std::filesystem::is_regular_file(q.pages[box.page_index])) {
                    try {
                        const PageImage img = load_image(q.pages[box.page_index]);
                        (void)fineness_ratio(box.x, box.y, box.w, box.h, img.width(), img.height());
                    } catch (const Error& e) {
                        problems.add(qid, bat, e.what());
                    }
                }
                q.evidence = box;
            }
        }
        ds.records.push_back(std::move(q));
    }
    if (!problems.empty()) throw ValidationError("dataset validation failed:\n" + problems.str());
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read dataset: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("dataset " + path.string() + " is not valid JSON: " + e.what());
    }
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return parse_dataset(doc, base);
}

Fineness fineness_ratio(int x, int y, int w, int h, int page_width, int page_height) {
    if (page_width < 1 || page_height < 1) throw DomainError("page dimensions must be positive");
    if (w < 1 || h < 1) throw DomainError("evidence box must have positive size");
    if (x < 0 || y < 0 || x + w > page_width || y + h > page_height) {
        throw DomainError("evidence box (" + std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(w) +
                          "," + std::to_string(h) + ") leaves the " + std::to_string(page_width) + "x" +
                          std::to_string(page_height) + " page");
    }
    const double ratio = (static_cast<double>(w) * h) / (static_cast<double>(page_width) * page_height);
    return {ratio, ratio < kFineGrainedThreshold};
}

// ---------------------------------------------------------------------------------------------
// Run configuration

json to_json(const RunConfig& c) {
    return {{"setting", to_string(c.setting)},
            {"pipeline", to_string(c.pipeline)},
            {"grid_n", c.grid_n},
            {"alpha", c.alpha},
            {"highlight", {c.highlight.r, c.highlight.g, c.highlight.b}},
            {"sigma", {{"max", c.sigma.max_sigma},
                       {"steepness", c.sigma.steepness},
                       {"midpoint", c.sigma.midpoint},
                       {"draw_threshold", c.sigma.draw_threshold}}},
            {"k", c.k},
            {"m", c.m},
            {"seed", c.seed},
            {"parallelism", c.parallelism},
            {"max_in_flight", c.max_in_flight},
            {"clean_mode", c.clean_mode == CleanMode::llm ? "llm" : "rule_based"},
            {"anls_tau", c.anls_tau},
            {"max_tokens", c.max_tokens},
            {"temperature", c.temperature},
            {"retry", {{"attempts", c.retry.attempts},
                       {"initial_backoff_ms", c.retry.initial_backoff.count()},
                       {"multiplier", c.retry.multiplier}}}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) throw ConfigError("run config must be an object");
    static const std::set<std::string> kKeys{"setting", "pipeline",   "grid_n",     "alpha",        "highlight",
                                             "sigma",   "k",          "m",          "seed",         "parallelism",
                                             "max_in_flight", "clean_mode", "anls_tau", "max_tokens", "temperature",
                                             "retry"};
    for (const auto& [key, _] : j.items()) {
        if (!kKeys.count(key)) throw ConfigError("unknown config key $.run." + key);
    }
    auto check_nested = [](const json& o, std::initializer_list<const char*> keys, const std::string& where) {
        if (!o.is_object()) throw ConfigError(where + " must be an object");
        for (const auto& [key, _] : o.items()) {
            if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) == keys.end()) {
                throw ConfigError("unknown config key " + where + "." + key);
            }
        }
    };
    if (j.contains("sigma")) check_nested(j["sigma"], {"max", "steepness", "midpoint", "draw_threshold"}, "$.run.sigma");
    if (j.contains("retry")) check_nested(j["retry"], {"attempts", "initial_backoff_ms", "multiplier"}, "$.run.retry");
    try {
        if (j.contains("setting")) c.setting = parse_setting(j["setting"].get<std::string>());
        if (j.contains("pipeline")) c.pipeline = parse_pipeline(j["pipeline"].get<std::string>());
        if (j.contains("grid_n")) c.grid_n = j["grid_n"].get<int>();
        if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
        if (j.contains("highlight")) {
            const auto h = j["highlight"].get<std::vector<int>>();
            if (h.size() != 3) throw ConfigError("highlight must be [r,g,b]");
            c.highlight = {static_cast<std::uint8_t>(h[0]), static_cast<std::uint8_t>(h[1]), static_cast<std::uint8_t>(h[2])};
        }
        if (j.contains("sigma")) {
            const auto& s = j["sigma"];
            c.sigma.max_sigma = s.value("max", c.sigma.max_sigma);
            c.sigma.steepness = s.value("steepness", c.sigma.steepness);
            c.sigma.midpoint = s.value("midpoint", c.sigma.midpoint);
            c.sigma.draw_threshold = s.value("draw_threshold", c.sigma.draw_threshold);
        }
        if (j.contains("k")) c.k = j["k"].get<std::size_t>();
        if (j.contains("m")) c.m = j["m"].get<std::size_t>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<std::size_t>();
        if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<std::size_t>();
        if (j.contains("clean_mode")) {
            const auto m = j["clean_mode"].get<std::string>();
            if (m == "llm") c.clean_mode = CleanMode::llm;
            else if (m == "rule_based") c.clean_mode = CleanMode::rule_based;
            else throw ConfigError("clean_mode must be rule_based or llm");
        }
        if (j.contains("anls_tau")) c.anls_tau = j["anls_tau"].get<double>();
        if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<int>();
        if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
        if (j.contains("retry")) {
            const auto& r = j["retry"];
            c.retry.attempts = r.value("attempts", c.retry.attempts);
            c.retry.initial_backoff = std::chrono::milliseconds(r.value("initial_backoff_ms", c.retry.initial_backoff.count()));
            c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid run config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------------------------
// Evaluation

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point t) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t).count();
}

void validate_config(const RunConfig& c, const EvalBackends& b) {
    if (b.mllm == nullptr) throw ConfigError("evaluation needs an MLLM backend");
    (void)GridSpec(c.grid_n);
    if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (c.k < 1) throw ConfigError("k must be >= 1");
    if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (c.clean_mode == CleanMode::llm && b.mllm == nullptr) throw ConfigError("llm query cleaning needs an MLLM");
    const bool needs_embedding = c.pipeline == Pipeline::spotlight || c.setting == Setting::open;
    if (needs_embedding && b.embedding == nullptr) {
        throw ConfigError("pipeline/setting combination needs an embedding backend");
    }
    if (c.setting != Setting::closed) {
        if (b.index == nullptr) throw ConfigError(std::string(to_string(c.setting)) + " setting requires a corpus index");
        if (b.embedding != nullptr) {
            try {
                b.index->require_backend(b.embedding->descriptor());
            } catch (const ValidationError& e) {
                if (c.setting == Setting::open || c.pipeline == Pipeline::spotlight) throw ConfigError(e.what());
            }
        }
    }
}

std::string canonical_key(const std::filesystem::path& p) {
    std::error_code ec;
    auto c = std::filesystem::weakly_canonical(p, ec);
    return (ec ? std::filesystem::absolute(p) : c).lexically_normal().string();
}

std::string display_path(const std::filesystem::path& p, const std::filesystem::path& base) {
    const auto rel = std::filesystem::absolute(p).lexically_normal().lexically_relative(
        std::filesystem::absolute(base).lexically_normal());
    return rel.empty() ? p.generic_string() : rel.generic_string();
}

std::vector<std::filesystem::path> resolve_pages(const QARecord& rec, const RunConfig& c, const EvalBackends& b,
                                                 double& select_ms) {
    switch (c.setting) {
        case Setting::closed:
            return rec.pages;
        case Setting::open: {
            const auto t = clock_type::now();
            const auto q = embed_text(*b.embedding, clean_query(rec.question, c.clean_mode, b.mllm));
            const auto ranked = retrieve_topk(q, *b.index, c.k);
            std::vector<std::filesystem::path> out;
            for (const auto& r : ranked.ranked) out.push_back(b.index->find(r.page_id)->path);
            select_ms += ms_since(t);
            return out;
        }
        case Setting::distractor: {
            std::vector<std::string> relevant;
            std::set<std::string> relevant_set;
            std::map<std::string, std::filesystem::path> by_key;
            for (const auto& p : rec.pages) {
                auto key = canonical_key(p);
                if (relevant_set.insert(key).second) relevant.push_back(key);
                by_key[key] = p;
            }
            std::vector<std::string> pool;
            for (const auto& e : b.index->entries()) {
                auto key = canonical_key(e.path);
                if (relevant_set.count(key) || by_key.count(key)) continue;
                by_key[key] = e.path;
                pool.push_back(std::move(key));
            }
            const auto seed = c.seed ^ fnv1a64(rec.qid);
            const auto mixed = inject_distractors(relevant, pool, std::min(c.m, pool.size()), seed);
            std::vector<std::filesystem::path> out;
            for (const auto& key : mixed) out.push_back(by_key.at(key));
            return out;
        }
    }
    return rec.pages;
}

std::string read_ocr_sidecar(const std::filesystem::path& page) {
    for (const auto& candidate : {std::filesystem::path(page.string() + ".txt"),
                                  std::filesystem::path(page).replace_extension(".txt")}) {
        std::ifstream in(candidate);
        if (in) return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    throw InputError("no OCR sidecar (.txt) for page " + page.string());
}

EvalRow evaluate_record(const QARecord& rec, const Dataset& ds, const RunConfig& c, const EvalBackends& b) {
    EvalRow row;
    row.qid = rec.qid;
    row.domain = rec.domain;
    row.category = rec.category;
    const std::optional<std::string_view> gold_option =
        rec.choices ? std::optional<std::string_view>(rec.answers.front()) : std::nullopt;

    try {
        const auto pages = resolve_pages(rec, c, b, row.latency.select_ms);
        for (const auto& p : pages) row.pages.push_back(display_path(p, ds.base_dir));

        MllmRequest req;
        req.model_id = b.mllm->descriptor().model_id;
        req.max_tokens = c.max_tokens;
        req.temperature = c.temperature;

        switch (c.pipeline) {
            case Pipeline::baseline:
            case Pipeline::cot:
                req.prompt = build_prompt(rec.question, c.pipeline == Pipeline::cot ? PromptMode::cot : PromptMode::baseline);
                for (const auto& p : pages) req.images.push_back(encode_png(load_image(p)));
                break;
            case Pipeline::spotlight: {
                SpotlightConfig sc;
                sc.grid = GridSpec(c.grid_n);
                sc.style = {c.highlight, c.alpha};
                sc.sigma = c.sigma;
                sc.clean_mode = c.clean_mode;
                sc.cleaner = b.mllm;
                sc.max_in_flight = c.max_in_flight;
                req.prompt = build_prompt(rec.question, PromptMode::spotlight);
                for (std::size_t k = 0; k < pages.size(); ++k) {
                    const PageImage page = load_image(pages[k]);
                    const SpotlightResult s = spotlight(page, rec.question, *b.embedding, sc);
                    row.latency.select_ms += s.select_ms;
                    row.latency.mask_ms += s.mask_ms;
                    row.selections.push_back({row.pages[k], s.selection.i_star, s.selection.j_star, s.selection.p,
                                              s.params.sigma, s.params.draw});
                    req.images.push_back(encode_png(s.attended.image));
                }
                break;
            }
            case Pipeline::ocr_stub: {
                std::string ocr;
                for (std::size_t k = 0; k < pages.size(); ++k) {
                    ocr += "--- page " + std::to_string(k + 1) + " ---\n" + read_ocr_sidecar(pages[k]);
                    if (!ocr.ends_with('\n')) ocr.push_back('\n');
                }
                req.prompt = build_ocr_prompt(rec.question, ocr);
                break;
            }
        }

        const Answer ans = ask(*b.mllm, req, b.cache, c.retry);
        row.latency.ask_ms = ans.latency_ms;
        row.cache_hit = ans.cache_hit;
        row.raw = ans.raw;
        row.prediction = c.pipeline == Pipeline::cot ? extract_cot_answer(ans.raw) : ans.raw;
        row.score = score_question(rec.qid, row.prediction, rec.answers, gold_option, c.anls_tau);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        row.failed = true;
        row.error = e.what();
        row.score = QuestionScore{rec.qid, 0, 0.0, 0.0, gold_option ? std::optional<int>(0) : std::nullopt};
    }
    return row;
}

}  // namespace

EvalReport run_eval(const Dataset& dataset, const RunConfig& config, const EvalBackends& backends) {
    validate_config(config, backends);
    if (dataset.records.empty()) throw DomainError("dataset has no records");

    std::optional<CachedEmbeddingBackend> cached_embedding;
    EvalBackends b = backends;
    if (b.cache != nullptr && b.cache->enabled() && b.embedding != nullptr) {
        cached_embedding.emplace(*b.embedding, *b.cache);
        b.embedding = &*cached_embedding;
    }
    const CacheStats before = b.cache ? b.cache->stats() : CacheStats{};

    std::vector<EvalRow> rows(dataset.records.size());
    parallel_for(rows.size(), config.parallelism,
                 [&](std::size_t k) { rows[k] = evaluate_record(dataset.records[k], dataset, config, b); });

    std::sort(rows.begin(), rows.end(), [](const EvalRow& x, const EvalRow& y) { return x.qid < y.qid; });

    EvalReport report;
    std::vector<QuestionScore> scores;
    std::vector<std::string> domains;
    std::vector<StageLatency> latencies;
    for (const auto& r : rows) {
        scores.push_back(r.score);
        domains.push_back(r.domain);
        latencies.push_back(r.latency);
    }
    report.scores = aggregate(scores, domains, latencies);
    report.rows = std::move(rows);

    json snapshot = to_json(config);
    if (backends.embedding) {
        const auto& d = backends.embedding->descriptor();
        snapshot["embedding"] = {{"backend_id", d.backend_id}, {"dim", d.dim},
                                 {"kind", d.kind == BackendKind::http ? "http" : "synthetic"}};
    }
    snapshot["mllm"] = {{"backend_id", backends.mllm->descriptor().backend_id},
                        {"model_id", backends.mllm->descriptor().model_id}};
    if (backends.index && config.setting != Setting::closed) {
        snapshot["index"] = {{"backend_id", backends.index->backend_id()}, {"built_at", backends.index->built_at()},
                             {"size", backends.index->size()}};
    }
    snapshot["pipeline_version"] = kPipelineVersion;
    report.config = std::move(snapshot);

    if (b.cache) {
        const CacheStats after = b.cache->stats();
        report.cache_hit_ratio = CacheStats{after.hits - before.hits, after.misses - before.misses}.hit_ratio();
    }
    return report;
}

}  // namespace spotlight
