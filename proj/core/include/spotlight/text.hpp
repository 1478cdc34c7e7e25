#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spotlight::text {

/// Decode UTF-8 into Unicode scalar values; invalid bytes decode to U+FFFD.
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

/// ASCII-only lowercase; other code points pass through.
std::string to_lower(std::string_view s);

/// True for ASCII punctuation and common typographic punctuation (quotes, dashes, ellipsis).
bool is_punct(char32_t c) noexcept;

/// Remove punctuation, keeping a punctuation char only when both neighbours are digits
/// (so "85.07" and "1,200" survive while "hindu." loses its period). With `to_space`, removed
/// characters become spaces, which splits hyphenated words instead of gluing them.
std::string strip_punct(std::string_view s, bool to_space = false);

std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");
std::string trim(std::string_view s);

}  // namespace spotlight::text
