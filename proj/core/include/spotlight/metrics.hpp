#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spotlight {

inline constexpr double kDefaultAnlsThreshold = 0.5;

/// 1 iff the normalized prediction equals some normalized gold.
int exact_match(std::string_view pred, std::span<const std::string> golds);

/// SQuAD token F1, max over golds. Both empty -> 1, exactly one empty -> 0.
double token_f1(std::string_view pred, std::span<const std::string> golds);

/// Edit distance over Unicode scalar values.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Max over golds of 1 - NL when NL < tau else 0, NL = lev / max(len, 1) on the normalized,
/// space-joined strings.
double anls(std::string_view pred, std::span<const std::string> golds, double tau = kDefaultAnlsThreshold);

/// First standalone option letter A-D in pred (see extract_option); empty when none.
std::optional<char> extract_option(std::string_view pred);

/// 1 iff extract_option(pred) equals the gold label (case-insensitive).
int mcq_accuracy(std::string_view pred, std::string_view gold_option);

struct QuestionScore {
    std::string qid;
    int em = 0;
    double f1 = 0.0;
    double anls = 0.0;
    std::optional<int> acc;  // MCQ only

    friend bool operator==(const QuestionScore&, const QuestionScore&) = default;
};

/// Scores one prediction against its golds; when `gold_option` is given, acc is filled too.
QuestionScore score_question(std::string qid, std::string_view pred, std::span<const std::string> golds,
                             std::optional<std::string_view> gold_option = std::nullopt,
                             double tau = kDefaultAnlsThreshold);

struct StageLatency {
    double select_ms = 0.0;
    double mask_ms = 0.0;
    double ask_ms = 0.0;

    friend bool operator==(const StageLatency&, const StageLatency&) = default;
};

struct MetricMeans {
    std::size_t count = 0;
    double em = 0.0;
    double f1 = 0.0;
    double anls = 0.0;
    std::size_t acc_count = 0;          // number of MCQ questions
    std::optional<double> acc;          // mean over MCQ questions, when any
    StageLatency latency;               // mean per question

    friend bool operator==(const MetricMeans&, const MetricMeans&) = default;
};

struct AggregateScores {
    std::map<std::string, MetricMeans> per_domain;  // ordered alphabetically
    MetricMeans overall;

    friend bool operator==(const AggregateScores&, const AggregateScores&) = default;
};

/// Per-domain and overall means. `domains[k]` and `latencies[k]` (optional, may be empty) align
/// with `scores[k]`. Throws DomainError on empty or misaligned input.
AggregateScores aggregate(std::span<const QuestionScore> scores, std::span<const std::string> domains,
                          std::span<const StageLatency> latencies = {});

}  // namespace spotlight
