#include "spotlight/query.hpp"

#include <algorithm>

#include "spotlight/answerer.hpp"
#include "spotlight/error.hpp"
#include "spotlight/text.hpp"

namespace spotlight {

namespace {

// English function words plus a few question-framing verbs ("according", "mentioned").
// Kept sorted for binary search. Single-letter tokens are absent so that variable names such
// as "m" or "x" survive cleaning.
constexpr std::string_view kStopwords[] = {
    "about", "above", "according", "after", "again", "against", "all", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "given", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "if", "in", "into", "is", "it", "its", "itself",
    "just", "listed", "me", "mentioned", "more", "most", "my", "myself", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
    "own", "please", "provided", "same", "shall", "she", "should", "shown", "so", "some", "stated",
    "such", "tell", "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
    "very", "was", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "whose",
    "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
};

std::string drop_possessive(std::string token) {
    while (!token.empty() && std::string_view(".,;:!?)]\"").find(token.back()) != std::string_view::npos) {
        token.pop_back();
    }
    static constexpr std::string_view kAscii = "'s";
    static constexpr std::string_view kCurly = "’s";
    if (token.size() > kAscii.size() && token.ends_with(kAscii)) {
        token.resize(token.size() - kAscii.size());
    } else if (token.size() > kCurly.size() && token.ends_with(kCurly)) {
        token.resize(token.size() - kCurly.size());
    }
    return token;
}

}  // namespace

std::span<const std::string_view> stopwords() { return kStopwords; }

bool is_stopword(std::string_view token) {
    return std::binary_search(std::begin(kStopwords), std::end(kStopwords), token);
}

std::string query_cleaning_prompt(std::string_view query) {
    std::string prompt =
        "Rewrite the following question as a short search query for locating the answer in a document "
        "image. Remove stop words and any extraneous information; keep names, numbers and key terms in "
        "their original order. Reply with the cleaned query only, on a single line.\n\nQuestion: ";
    prompt.append(query);
    return prompt;
}

std::string clean_query(std::string_view query, CleanMode mode, MllmBackend* mllm) {
    const std::string trimmed = text::trim(query);
    if (trimmed.empty()) throw DomainError("query is empty");

    if (mode == CleanMode::llm) {
        if (mllm == nullptr) throw ConfigError("llm query cleaning requires a configured MLLM backend");
        MllmRequest req;
        req.prompt = query_cleaning_prompt(trimmed);
        req.max_tokens = 64;
        const MllmReply reply = mllm->complete(req);
        std::string line = reply.text.substr(0, reply.text.find('\n'));
        line = text::trim(line);
        if (line.empty()) return clean_query(trimmed, CleanMode::rule_based);
        return line;
    }

    std::vector<std::string> all;
    std::vector<std::string> kept;
    for (auto& raw : text::split_ws(text::to_lower(trimmed))) {
        std::string token = text::strip_punct(drop_possessive(std::move(raw)), /*to_space=*/true);
        for (auto& part : text::split_ws(token)) {
            all.push_back(part);
            if (!is_stopword(part)) kept.push_back(std::move(part));
        }
    }
    if (all.empty()) throw DomainError("query has no content words: '" + trimmed + "'");
    if (kept.empty()) return text::join(all);
    return text::join(kept);
}

}  // namespace spotlight
