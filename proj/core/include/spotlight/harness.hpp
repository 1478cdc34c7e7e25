#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spotlight/answerer.hpp"
#include "spotlight/attention.hpp"
#include "spotlight/metrics.hpp"
#include "spotlight/retrieval.hpp"

namespace spotlight {

class ContentCache;

enum class Category { inline_detail, boolean, comparative, reasoning, commonsense, unanswerable };

std::string_view to_string(Category c) noexcept;
std::optional<Category> parse_category(std::string_view s) noexcept;

/// Evidence region in pixels on pages[page_index].
struct EvidenceBox {
    int page_index = 0;
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

struct QARecord {
    std::string qid;
    std::string question;
    std::vector<std::string> answers;
    Category category = Category::inline_detail;
    std::string domain;
    std::string doc_id;
    std::vector<std::filesystem::path> pages;  // resolved against the dataset file's directory
    std::optional<std::vector<std::string>> choices;
    std::optional<EvidenceBox> evidence;
};

struct Dataset {
    std::filesystem::path base_dir;
    std::vector<QARecord> records;
};

inline constexpr std::string_view kDatasetSchema = "spotlight-dataset";
inline constexpr int kDatasetSchemaVersion = 1;

/// Parse and validate a dataset file. Every problem found (with qid and field path) is listed
/// in the thrown ValidationError; nothing is returned unless the whole file is valid.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const nlohmann::json& doc, const std::filesystem::path& base_dir);

struct Fineness {
    double ratio = 0.0;
    bool fine_grained = false;  // ratio < 0.05
};

inline constexpr double kFineGrainedThreshold = 0.05;

/// (w*h) / (W*H). Throws DomainError when the box leaves the page or is empty.
Fineness fineness_ratio(int x, int y, int w, int h, int page_width, int page_height);

enum class Setting { closed, open, distractor };
enum class Pipeline { baseline, spotlight, ocr_stub, cot };

std::string_view to_string(Setting s) noexcept;
std::string_view to_string(Pipeline p) noexcept;
Setting parse_setting(std::string_view s);
Pipeline parse_pipeline(std::string_view s);

struct RunConfig {
    Setting setting = Setting::closed;
    Pipeline pipeline = Pipeline::spotlight;
    int grid_n = 6;
    double alpha = 0.5;
    Rgb8 highlight{0, 0, 255};
    SigmaSchedule sigma;
    std::size_t k = 4;        // open-domain retrieval depth
    std::size_t m = 2;        // distractors per question
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;     // questions in flight
    std::size_t max_in_flight = 8;   // embedding batches in flight per page
    CleanMode clean_mode = CleanMode::rule_based;
    double anls_tau = kDefaultAnlsThreshold;
    int max_tokens = 256;
    double temperature = 0.0;
    RetryPolicy retry;
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

struct PageSelection {
    std::string page;
    int i_star = 0;
    int j_star = 0;
    double p = 0.0;
    double sigma = 0.0;
    bool draw = false;
};

struct EvalRow {
    std::string qid;
    std::string domain;
    Category category = Category::inline_detail;
    std::vector<std::string> pages;  // pages sent, in order (relative to the dataset directory)
    std::vector<PageSelection> selections;
    std::string raw;                 // model reply
    std::string prediction;          // text that was scored
    QuestionScore score;
    StageLatency latency;
    bool failed = false;
    std::string error;
    bool cache_hit = false;
};

struct EvalReport {
    AggregateScores scores;
    std::vector<EvalRow> rows;       // qid order
    nlohmann::json config;           // resolved config snapshot
    double cache_hit_ratio = 0.0;
};

struct EvalBackends {
    EmbeddingBackend* embedding = nullptr;  // required for spotlight and open-domain runs
    MllmBackend* mllm = nullptr;
    const CorpusIndex* index = nullptr;     // required for open/distractor settings
    ContentCache* cache = nullptr;          // optional
};

/// Run every record through the configured setting and pipeline. Per-question backend or input
/// failures become failed rows scored 0; configuration problems throw ConfigError before any
/// backend call.
EvalReport run_eval(const Dataset& dataset, const RunConfig& config, const EvalBackends& backends);

enum class ReportFormat { markdown, csv, json };

ReportFormat parse_report_format(std::string_view s);

struct RenderOptions {
    bool include_runtime = true;  // latencies and cache-hit ratio (not reproducible run to run)
};

std::string render_report(const EvalReport& report, ReportFormat format, const RenderOptions& options = {});

nlohmann::json report_to_json(const EvalReport& report, const RenderOptions& options = {});
EvalReport report_from_json(const nlohmann::json& j);

struct CsvReport {
    AggregateScores scores;
    std::vector<std::pair<QuestionScore, std::string>> questions;  // score + domain
};

/// Parses render_report(..., csv) output back into scores.
CsvReport parse_report_csv(std::string_view csv);

/// Runtime-only figures: per-stage mean latency, cache-hit ratio, per-row latency.
nlohmann::json run_stats_json(const EvalReport& report);

}  // namespace spotlight
