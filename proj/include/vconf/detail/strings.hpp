#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace vconf::detail {

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool is_alnum(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

/// Splits on '\n'; '\r' is stripped so CRLF input behaves like LF.
inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        auto line = text.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = nl + 1;
    }
    return lines;
}

/// Case-insensitive substring search; npos when absent.
inline std::size_t ifind(std::string_view haystack, std::string_view needle) {
    if (needle.empty() || haystack.size() < needle.size()) return std::string_view::npos;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        std::size_t j = 0;
        for (; j < needle.size(); ++j) {
            char a = static_cast<char>(std::tolower(static_cast<unsigned char>(haystack[i + j])));
            char b = static_cast<char>(std::tolower(static_cast<unsigned char>(needle[j])));
            if (a != b) break;
        }
        if (j == needle.size()) return i;
    }
    return std::string_view::npos;
}

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

/// Replaces the first occurrence of `needle`; returns false if absent.
inline bool replace_first(std::string& text, std::string_view needle, std::string_view replacement) {
    auto pos = text.find(needle);
    if (pos == std::string::npos) return false;
    text.replace(pos, needle.size(), replacement);
    return true;
}

} // namespace vconf::detail
