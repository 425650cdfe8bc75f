#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace erp {

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
}

inline char to_lower_ascii(char c) {
    return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = to_lower_ascii(c);
    return out;
}

inline std::string_view trim_view(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && is_ascii_space(s[b])) ++b;
    while (e > b && is_ascii_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

// Whitespace runs collapsed to single spaces, ends trimmed.
inline std::string collapse_ws(std::string_view s) {
    std::string out;
    bool in_ws = false;
    for (char c : s) {
        if (is_ascii_space(c)) {
            in_ws = !out.empty();
        } else {
            if (in_ws) out += ' ';
            in_ws = false;
            out += c;
        }
    }
    return out;
}

// Byte offset of the last case-insensitive occurrence of needle.
inline std::optional<size_t> rfind_ci(std::string_view haystack,
                                      std::string_view needle) {
    if (needle.empty() || haystack.size() < needle.size()) return std::nullopt;
    for (size_t i = haystack.size() - needle.size() + 1; i-- > 0;) {
        bool hit = true;
        for (size_t j = 0; j < needle.size(); ++j) {
            if (to_lower_ascii(haystack[i + j]) != to_lower_ascii(needle[j])) {
                hit = false;
                break;
            }
        }
        if (hit) return i;
    }
    return std::nullopt;
}

// One outermost \boxed{...} group. start points at the backslash, end is
// one past the closing brace.
struct BoxedGroup {
    size_t start = 0;
    size_t end = 0;
    std::string content;
};

struct BoxedScan {
    std::vector<BoxedGroup> groups;  // outermost groups, in order
    bool saw_unbalanced = false;
};

// Scans for outermost \boxed{...} groups with balanced braces. Nested
// \boxed markers inside a balanced group stay part of its content. A
// group whose braces never close sets saw_unbalanced and ends the scan.
inline BoxedScan scan_boxed_groups(std::string_view text) {
    static constexpr std::string_view kMarker = "\\boxed{";
    BoxedScan scan;
    size_t pos = 0;
    while (true) {
        size_t hit = text.find(kMarker, pos);
        if (hit == std::string_view::npos) break;
        size_t open = hit + kMarker.size() - 1;  // the '{'
        int depth = 1;
        size_t i = open + 1;
        for (; i < text.size() && depth > 0; ++i) {
            if (text[i] == '{') ++depth;
            if (text[i] == '}') --depth;
        }
        if (depth != 0) {
            scan.saw_unbalanced = true;
            break;
        }
        BoxedGroup g;
        g.start = hit;
        g.end = i;
        g.content = std::string(text.substr(open + 1, i - open - 2));
        scan.groups.push_back(std::move(g));
        pos = i;
    }
    return scan;
}

// Normal form for expression answers: drop all whitespace, strip
// trailing sentence punctuation and enclosing $ / { } wrappers. String
// compare on this form is the whole equivalence story; no CAS.
inline std::string normalize_expression(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (!is_ascii_space(c)) out += c;
    }
    bool changed = true;
    while (changed && !out.empty()) {
        changed = false;
        char last = out.back();
        if (last == '.' || last == ',' || last == ';') {
            out.pop_back();
            changed = true;
            continue;
        }
        if (out.size() >= 2 && out.front() == '$' && out.back() == '$') {
            out = out.substr(1, out.size() - 2);
            changed = true;
            continue;
        }
        if (out.size() >= 2 && out.front() == '{' && out.back() == '}') {
            // peel only if the outer braces form one group
            int depth = 0;
            bool whole = true;
            for (size_t i = 0; i < out.size(); ++i) {
                if (out[i] == '{') ++depth;
                if (out[i] == '}') --depth;
                if (depth == 0 && i + 1 < out.size()) {
                    whole = false;
                    break;
                }
            }
            if (whole && depth == 0) {
                out = out.substr(1, out.size() - 2);
                changed = true;
            }
        }
    }
    return out;
}

}  // namespace erp
