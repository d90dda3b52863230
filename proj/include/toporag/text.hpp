#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace toporag {

// Whitespace handling shared by the loader, the split logic and the mock
// backend. Whitespace is the Unicode White_Space set over UTF-8 input; no
// lowercasing, punctuation stays attached to its word.

/// Byte length of the whitespace code point starting at `pos`, or 0.
std::size_t whitespace_length(std::string_view text, std::size_t pos) noexcept;

std::vector<std::string_view> split_whitespace(std::string_view text);
std::size_t count_words(std::string_view text);

/// Collapse whitespace runs to one ASCII space and trim both ends.
std::string normalize_whitespace(std::string_view text);

std::string join_words(const std::vector<std::string_view>& words, std::size_t begin,
                       std::size_t end);

struct PrefixSplit {
    std::string prefix;  // first `words` tokens
    std::string suffix;  // everything after the separator following the prefix
};

/// Split whitespace-normalized text after `words` tokens. Requires
/// words < count_words(text).
PrefixSplit split_prefix(std::string_view normalized_text, std::size_t words);

/// Inverse of split_prefix: prefix + " " + suffix, or just suffix for an empty prefix.
std::string join_prefix_suffix(std::string_view prefix, std::string_view suffix);

}  // namespace toporag
