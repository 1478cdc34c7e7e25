#include "spotlight/harness.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spotlight/error.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

using nlohmann::json;

ReportFormat parse_report_format(std::string_view s) {
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    throw ConfigError("unknown report format '" + std::string(s) + "' (md, csv, json)");
}

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string shortest(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, end) : std::string("nan");
}

double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("report csv: bad number '" + std::string(s) + "' in column " + std::string(what));
    }
    return v;
}

std::size_t parse_size(std::string_view s, std::string_view what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ValidationError("report csv: bad integer '" + std::string(s) + "' in column " + std::string(what));
    }
    return v;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view csv) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t k = 0; k < csv.size(); ++k) {
        const char c = csv[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < csv.size() && csv[k + 1] == '"') {
                    field.push_back('"');
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && k + 1 < csv.size() && csv[k + 1] == '\n') ++k;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field.push_back(c);
            any = true;
        }
    }
    if (quoted) throw ValidationError("report csv: unterminated quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

json means_to_json(const MetricMeans& m, bool runtime) {
    json j = {{"count", m.count}, {"em", m.em}, {"f1", m.f1}, {"anls", m.anls}, {"acc_count", m.acc_count}};
    j["acc"] = m.acc ? json(*m.acc) : json(nullptr);
    if (runtime) {
        j["latency_ms"] = {{"select", m.latency.select_ms}, {"mask", m.latency.mask_ms}, {"ask", m.latency.ask_ms}};
    }
    return j;
}

MetricMeans means_from_json(const json& j) {
    MetricMeans m;
    m.count = j.at("count").get<std::size_t>();
    m.em = j.at("em").get<double>();
    m.f1 = j.at("f1").get<double>();
    m.anls = j.at("anls").get<double>();
    m.acc_count = j.value("acc_count", std::size_t{0});
    if (j.contains("acc") && !j["acc"].is_null()) m.acc = j["acc"].get<double>();
    if (j.contains("latency_ms")) {
        const auto& l = j["latency_ms"];
        m.latency = {l.value("select", 0.0), l.value("mask", 0.0), l.value("ask", 0.0)};
    }
    return m;
}

std::string label_of(const EvalReport& r) {
    const std::string pipeline = r.config.is_object() ? r.config.value("pipeline", "run") : "run";
    const std::string setting = r.config.is_object() ? r.config.value("setting", "") : "";
    return setting.empty() ? pipeline : pipeline + " (" + setting + ")";
}

std::string markdown(const EvalReport& r, const RenderOptions& opt) {
    std::ostringstream out;
    out << "# Evaluation report\n\n";
    if (r.config.is_object()) {
        out << "- pipeline: " << r.config.value("pipeline", "?") << "\n";
        out << "- setting: " << r.config.value("setting", "?") << "\n";
        if (r.config.contains("mllm")) out << "- model: " << r.config["mllm"].value("model_id", "?") << "\n";
        if (r.config.contains("embedding")) {
            out << "- embedding: " << r.config["embedding"].value("backend_id", "?") << "\n";
        }
        out << "- grid: " << r.config.value("grid_n", 0) << "x" << r.config.value("grid_n", 0) << "\n";
    }
    std::size_t failed = 0;
    for (const auto& row : r.rows) failed += row.failed ? 1 : 0;
    out << "- questions: " << r.scores.overall.count << " (" << failed << " failed)\n\n";

    const std::string label = label_of(r);
    auto header = [&] {
        out << "| Pipeline |";
        for (const auto& [domain, _] : r.scores.per_domain) out << ' ' << domain << " |";
        out << " All |\n|---|";
        for (std::size_t k = 0; k < r.scores.per_domain.size(); ++k) out << "---:|";
        out << "---:|\n";
    };
    auto table = [&](const char* title, auto value) {
        out << "## " << title << "\n\n";
        header();
        out << "| " << label << " |";
        for (const auto& [_, m] : r.scores.per_domain) out << ' ' << value(m) << " |";
        out << ' ' << value(r.scores.overall) << " |\n\n";
    };
    table("Exact Match (EM)", [](const MetricMeans& m) { return fixed2(m.em); });
    table("F1", [](const MetricMeans& m) { return fixed2(m.f1); });
    table("ANLS", [](const MetricMeans& m) { return fixed2(m.anls); });
    if (r.scores.overall.acc) {
        table("Accuracy (MCQ)", [](const MetricMeans& m) { return m.acc ? fixed2(*m.acc) : std::string("-"); });
    }
    table("Questions", [](const MetricMeans& m) { return std::to_string(m.count); });
    if (opt.include_runtime) {
        out << "## Runtime\n\n| Stage | Mean ms |\n|---|---:|\n";
        out << "| select | " << fixed2(r.scores.overall.latency.select_ms) << " |\n";
        out << "| mask | " << fixed2(r.scores.overall.latency.mask_ms) << " |\n";
        out << "| ask | " << fixed2(r.scores.overall.latency.ask_ms) << " |\n\n";
        out << "Cache hit ratio: " << fixed2(r.cache_hit_ratio) << "\n";
    }
    return out.str();
}

constexpr std::string_view kCsvBase[] = {"row_type", "qid", "domain", "category", "count", "em", "f1",
                                         "anls", "acc", "acc_count", "failed", "prediction", "error"};
constexpr std::string_view kCsvRuntime[] = {"select_ms", "mask_ms", "ask_ms"};

std::string csv(const EvalReport& r, const RenderOptions& opt) {
    std::ostringstream out;
    std::vector<std::string> head(std::begin(kCsvBase), std::end(kCsvBase));
    if (opt.include_runtime) head.insert(head.end(), std::begin(kCsvRuntime), std::end(kCsvRuntime));
    out << text::join(head, ",") << "\n";
    auto latency = [&](const StageLatency& l) {
        if (opt.include_runtime) out << ',' << shortest(l.select_ms) << ',' << shortest(l.mask_ms) << ',' << shortest(l.ask_ms);
        out << "\n";
    };
    for (const auto& row : r.rows) {
        out << "question," << csv_field(row.qid) << ',' << csv_field(row.domain) << ',' << to_string(row.category)
            << ",1," << row.score.em << ',' << shortest(row.score.f1) << ',' << shortest(row.score.anls) << ','
            << (row.score.acc ? std::to_string(*row.score.acc) : std::string()) << ',' << (row.score.acc ? 1 : 0) << ','
            << (row.failed ? 1 : 0) << ',' << csv_field(row.prediction) << ',' << csv_field(row.error);
        latency(row.latency);
    }
    auto means = [&](std::string_view type, std::string_view domain, const MetricMeans& m) {
        out << type << ",," << csv_field(domain) << ",," << m.count << ',' << shortest(m.em) << ',' << shortest(m.f1)
            << ',' << shortest(m.anls) << ',' << (m.acc ? shortest(*m.acc) : std::string()) << ',' << m.acc_count
            << ",,,";
        latency(m.latency);
    };
    for (const auto& [domain, m] : r.scores.per_domain) means("domain", domain, m);
    means("overall", "", r.scores.overall);
    return out.str();
}

json row_to_json(const EvalRow& row, bool runtime) {
    json sel = json::array();
    for (const auto& s : row.selections) {
        sel.push_back({{"page", s.page}, {"i", s.i_star}, {"j", s.j_star}, {"p", s.p}, {"sigma", s.sigma}, {"draw", s.draw}});
    }
    json j = {{"qid", row.qid},
              {"domain", row.domain},
              {"category", to_string(row.category)},
              {"pages", row.pages},
              {"selections", std::move(sel)},
              {"raw", row.raw},
              {"prediction", row.prediction},
              {"em", row.score.em},
              {"f1", row.score.f1},
              {"anls", row.score.anls},
              {"acc", row.score.acc ? json(*row.score.acc) : json(nullptr)},
              {"failed", row.failed},
              {"error", row.error}};
    if (runtime) {
        j["latency_ms"] = {{"select", row.latency.select_ms}, {"mask", row.latency.mask_ms}, {"ask", row.latency.ask_ms}};
        j["cache_hit"] = row.cache_hit;
    }
    return j;
}

}  // namespace

json report_to_json(const EvalReport& r, const RenderOptions& opt) {
    json per = json::object();
    for (const auto& [domain, m] : r.scores.per_domain) per[domain] = means_to_json(m, opt.include_runtime);
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(row_to_json(row, opt.include_runtime));
    json j = {{"format", "spotlight-report"},
              {"version", 1},
              {"config", r.config},
              {"aggregate", {{"per_domain", std::move(per)}, {"overall", means_to_json(r.scores.overall, opt.include_runtime)}}},
              {"rows", std::move(rows)}};
    if (opt.include_runtime) j["runtime"] = {{"cache_hit_ratio", r.cache_hit_ratio}};
    return j;
}

EvalReport report_from_json(const json& j) {
    if (!j.is_object() || j.value("format", "") != "spotlight-report") {
        throw ValidationError("not a spotlight report (missing \"format\": \"spotlight-report\")");
    }
    if (j.value("version", 0) != 1) throw ValidationError("unsupported report version");
    EvalReport r;
    try {
        r.config = j.value("config", json::object());
        const auto& agg = j.at("aggregate");
        for (const auto& [domain, m] : agg.at("per_domain").items()) r.scores.per_domain.emplace(domain, means_from_json(m));
        r.scores.overall = means_from_json(agg.at("overall"));
        for (const auto& jr : j.at("rows")) {
            EvalRow row;
            row.qid = jr.at("qid").get<std::string>();
            row.domain = jr.at("domain").get<std::string>();
            const auto cat = parse_category(jr.at("category").get<std::string>());
            if (!cat) throw ValidationError("report row " + row.qid + " has an unknown category");
            row.category = *cat;
            row.pages = jr.value("pages", std::vector<std::string>{});
            for (const auto& s : jr.value("selections", json::array())) {
                row.selections.push_back({s.at("page").get<std::string>(), s.at("i").get<int>(), s.at("j").get<int>(),
                                          s.at("p").get<double>(), s.at("sigma").get<double>(), s.at("draw").get<bool>()});
            }
            row.raw = jr.value("raw", "");
            row.prediction = jr.value("prediction", "");
            row.score.qid = row.qid;
            row.score.em = jr.at("em").get<int>();
            row.score.f1 = jr.at("f1").get<double>();
            row.score.anls = jr.at("anls").get<double>();
            if (jr.contains("acc") && !jr["acc"].is_null()) row.score.acc = jr["acc"].get<int>();
            row.failed = jr.value("failed", false);
            row.error = jr.value("error", "");
            if (jr.contains("latency_ms")) {
                const auto& l = jr["latency_ms"];
                row.latency = {l.value("select", 0.0), l.value("mask", 0.0), l.value("ask", 0.0)};
            }
            row.cache_hit = jr.value("cache_hit", false);
            r.rows.push_back(std::move(row));
        }
        if (j.contains("runtime")) r.cache_hit_ratio = j["runtime"].value("cache_hit_ratio", 0.0);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    return r;
}

std::string render_report(const EvalReport& report, ReportFormat format, const RenderOptions& options) {
    switch (format) {
        case ReportFormat::markdown: return markdown(report, options);
        case ReportFormat::csv: return csv(report, options);
        case ReportFormat::json: return report_to_json(report, options).dump(2) + "\n";
    }
    return {};
}

CsvReport parse_report_csv(std::string_view text_in) {
    const auto rows = parse_csv_rows(text_in);
    if (rows.empty()) throw ValidationError("report csv is empty");
    const auto& head = rows.front();
    auto col = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t k = 0; k < head.size(); ++k) {
            if (head[k] == name) return k;
        }
        return std::nullopt;
    };
    for (auto name : kCsvBase) {
        if (!col(name)) throw ValidationError("report csv: missing column " + std::string(name));
    }
    const bool runtime = col("select_ms") && col("mask_ms") && col("ask_ms");
    auto get = [&](const std::vector<std::string>& row, std::string_view name) -> const std::string& {
        const std::size_t k = *col(name);
        if (k >= row.size()) throw ValidationError("report csv: short row");
        return row[k];
    };

    CsvReport out;
    bool have_overall = false;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string& type = get(row, "row_type");
        StageLatency lat;
        if (runtime) {
            lat = {parse_double(get(row, "select_ms"), "select_ms"), parse_double(get(row, "mask_ms"), "mask_ms"),
                   parse_double(get(row, "ask_ms"), "ask_ms")};
        }
        if (type == "question") {
            QuestionScore s;
            s.qid = get(row, "qid");
            s.em = static_cast<int>(parse_size(get(row, "em"), "em"));
            s.f1 = parse_double(get(row, "f1"), "f1");
            s.anls = parse_double(get(row, "anls"), "anls");
            if (!get(row, "acc").empty()) s.acc = static_cast<int>(parse_size(get(row, "acc"), "acc"));
            out.questions.emplace_back(std::move(s), get(row, "domain"));
        } else if (type == "domain" || type == "overall") {
            MetricMeans m;
            m.count = parse_size(get(row, "count"), "count");
            m.em = parse_double(get(row, "em"), "em");
            m.f1 = parse_double(get(row, "f1"), "f1");
            m.anls = parse_double(get(row, "anls"), "anls");
            m.acc_count = parse_size(get(row, "acc_count"), "acc_count");
            if (!get(row, "acc").empty()) m.acc = parse_double(get(row, "acc"), "acc");
            m.latency = lat;
            if (type == "domain") {
                out.scores.per_domain.emplace(get(row, "domain"), m);
            } else {
                out.scores.overall = m;
                have_overall = true;
            }
        } else {
            throw ValidationError("report csv: unknown row_type '" + type + "'");
        }
    }
    if (!have_overall) throw ValidationError("report csv: no overall row");
    return out;
}

json run_stats_json(const EvalReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"qid", row.qid},
                        {"select_ms", row.latency.select_ms},
                        {"mask_ms", row.latency.mask_ms},
                        {"ask_ms", row.latency.ask_ms},
                        {"cache_hit", row.cache_hit}});
    }
    const auto& l = r.scores.overall.latency;
    return {{"cache_hit_ratio", r.cache_hit_ratio},
            {"mean_latency_ms", {{"select", l.select_ms}, {"mask", l.mask_ms}, {"ask", l.ask_ms}}},
            {"per_domain_mean_latency_ms",
             [&] {
                 json d = json::object();
                 for (const auto& [domain, m] : r.scores.per_domain) {
                     d[domain] = {{"select", m.latency.select_ms}, {"mask", m.latency.mask_ms}, {"ask", m.latency.ask_ms}};
                 }
                 return d;
             }()},
            {"rows", std::move(rows)}};
}

}  // namespace spotlight
