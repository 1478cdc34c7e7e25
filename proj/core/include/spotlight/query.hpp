#pragma once

#include <span>
#include <string>
#include <string_view>

namespace spotlight {

class MllmBackend;

enum class CleanMode { rule_based, llm };

/// Version tag of the shipped stopword list; part of embedding cache keys.
inline constexpr std::string_view kStopwordListVersion = "stopwords-en-v1";

std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view token);

/// Reduce a question to its content words.
///
/// rule_based: lowercase, drop possessive 's, strip punctuation (digit-internal marks such as the
/// point in "85.07" are kept), remove stopwords, keep order. If nothing survives, the lowercased
/// punctuation-free text is returned instead so the result is never empty.
///
/// llm: asks `mllm` to rewrite the query and returns the first line of its reply, trimmed.
/// Throws DomainError on an empty query and ConfigError when llm mode has no backend.
std::string clean_query(std::string_view query, CleanMode mode = CleanMode::rule_based,
                        MllmBackend* mllm = nullptr);

/// The instruction sent to the MLLM in llm cleaning mode.
std::string query_cleaning_prompt(std::string_view query);

}  // namespace spotlight
