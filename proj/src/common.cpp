#include "toporag/common.hpp"
#include "toporag/random.hpp"
#include "toporag/text.hpp"

#include <array>
#include <numeric>
#include <unordered_map>

namespace toporag {

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t population, std::size_t count) {
    count = std::min(count, population);
    std::vector<std::size_t> out;
    out.reserve(count);
    if (population <= 4 * count + 64) {
        std::vector<std::size_t> pool(population);
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::size_t>(below(population - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }
    // Sparse variant of the same partial Fisher-Yates: only displaced slots are stored.
    std::unordered_map<std::size_t, std::size_t> displaced;
    auto at = [&](std::size_t k) {
        auto it = displaced.find(k);
        return it == displaced.end() ? k : it->second;
    };
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(below(population - i));
        const std::size_t vi = at(i);
        const std::size_t vj = at(j);
        displaced[j] = vi;
        displaced[i] = vj;
        out.push_back(vj);
    }
    return out;
}

namespace {

// Decode one UTF-8 code point; invalid bytes decode as themselves with length 1.
char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t k) -> int {
        if (pos + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        len = 1;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) {
            len = 2;
            return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            len = 3;
            return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            len = 4;
            return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
        }
    }
    len = 1;
    return b0;
}

bool is_unicode_space(char32_t c) noexcept {
    switch (c) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

}  // namespace

std::size_t whitespace_length(std::string_view text, std::size_t pos) noexcept {
    std::size_t len = 0;
    const char32_t c = decode_utf8(text, pos, len);
    return is_unicode_space(c) ? len : 0;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t pos = 0;
    std::size_t start = std::string_view::npos;
    while (pos < text.size()) {
        const std::size_t ws = whitespace_length(text, pos);
        if (ws > 0) {
            if (start != std::string_view::npos) {
                words.push_back(text.substr(start, pos - start));
                start = std::string_view::npos;
            }
            pos += ws;
        } else {
            if (start == std::string_view::npos) start = pos;
            ++pos;
        }
    }
    if (start != std::string_view::npos) words.push_back(text.substr(start));
    return words;
}

std::size_t count_words(std::string_view text) { return split_whitespace(text).size(); }

std::string join_words(const std::vector<std::string_view>& words, std::size_t begin,
                       std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end && i < words.size(); ++i) {
        if (i > begin) out.push_back(' ');
        out.append(words[i]);
    }
    return out;
}

std::string normalize_whitespace(std::string_view text) {
    const auto words = split_whitespace(text);
    return join_words(words, 0, words.size());
}

PrefixSplit split_prefix(std::string_view normalized_text, std::size_t words) {
    const auto tokens = split_whitespace(normalized_text);
    if (words >= tokens.size()) {
        throw ValidationError("prefix of " + std::to_string(words) +
                              " words leaves no suffix in a text of " +
                              std::to_string(tokens.size()) + " words");
    }
    return {join_words(tokens, 0, words), join_words(tokens, words, tokens.size())};
}

std::string join_prefix_suffix(std::string_view prefix, std::string_view suffix) {
    if (prefix.empty()) return std::string(suffix);
    std::string out(prefix);
    out.push_back(' ');
    out.append(suffix);
    return out;
}

}  // namespace toporag
