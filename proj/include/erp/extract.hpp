#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "erp/corpus.hpp"
#include "erp/errors.hpp"
#include "erp/textscan.hpp"

namespace erp {

// ---------------------------------------------------------------------------
// Results

enum class ExtractStatus { ok, no_answer, label_out_of_range, unbalanced_braces };

inline const char* extract_status_name(ExtractStatus s) {
    switch (s) {
        case ExtractStatus::ok: return "ok";
        case ExtractStatus::no_answer: return "no_answer";
        case ExtractStatus::label_out_of_range: return "label_out_of_range";
        case ExtractStatus::unbalanced_braces: return "unbalanced_braces";
    }
    return "?";
}

struct ExtractedAnswer {
    GoldAnswer value;
    size_t span_begin = 0;  // byte offsets into the transcript
    size_t span_end = 0;
    std::string rule_id;
};

struct ExtractResult {
    ExtractStatus status = ExtractStatus::no_answer;
    std::optional<ExtractedAnswer> answer;

    bool ok() const { return status == ExtractStatus::ok; }

    static ExtractResult hit(GoldAnswer value, size_t begin, size_t end,
                             std::string rule_id) {
        ExtractResult r;
        r.status = ExtractStatus::ok;
        r.answer = {std::move(value), begin, end, std::move(rule_id)};
        return r;
    }
    static ExtractResult miss(ExtractStatus s = ExtractStatus::no_answer) {
        ExtractResult r;
        r.status = s;
        return r;
    }
};

// ---------------------------------------------------------------------------
// Rule table. Every rule_id an extractor can emit lives here, and the
// shipped rules file is generated from this table so the two cannot drift.

struct ExtractionRule {
    std::string_view id;
    int priority;  // 1 = anchored form, 2 = fallback
    std::string_view description;
};

inline const std::vector<ExtractionRule>& extraction_rules() {
    static const std::vector<ExtractionRule> kRules = {
        {"numeric.anchor", 1,
         "first number after the last \"answer is\" (case-insensitive); "
         "\"$\" and digit-group commas stripped, trailing period and unit "
         "words ignored"},
        {"numeric.last_number", 2, "last number anywhere in the transcript"},
        {"choice.anchor", 1,
         "first standalone label after the last \"answer is\": \"(a)\"..."
         "\"(e)\" or a bare letter a-e bounded by non-alphanumerics; "
         "uppercased"},
        {"choice.last_label", 2,
         "last parenthesized label \"(a)\"...\"(e)\" in the transcript; if "
         "none, last standalone capital A-E token"},
        {"boolean.anchor", 1,
         "last \"answer is\" that is followed by yes or no "
         "(case-insensitive)"},
        {"boolean.trailing_token", 2,
         "last standalone yes/no token in the transcript"},
        {"expression.boxed", 1,
         "content of the last balanced \\boxed{...} group, whitespace "
         "collapsed"},
        {"expression.anchor", 2,
         "text after the final \"answer is\", whitespace collapsed, "
         "trailing sentence punctuation stripped"},
    };
    return kRules;
}

// Rendered form of the rule table (one line per rule, tab-separated).
// assets/extraction_rules.txt holds exactly this text.
inline std::string extraction_rules_text() {
    std::string out =
        "# Extraction rule table. Columns: rule_id, priority, pattern.\n"
        "# Priority 1 rules are anchored forms; priority 2 rules are the\n"
        "# fallbacks tried when no anchor form matches.\n";
    for (const auto& r : extraction_rules()) {
        out += std::string(r.id) + "\t" + std::to_string(r.priority) + "\t" +
               std::string(r.description) + "\n";
    }
    return out;
}

namespace detail {

constexpr std::string_view kAnchor = "answer is";

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) {
    return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// A number token at or after `from`: optional '-' and '$' prefixes, digit
// groups with ",ddd" thousands separators, optional fraction. Returns the
// span actually consumed and the cleaned digits.
struct NumberToken {
    size_t begin = 0;
    size_t end = 0;
    std::string cleaned;  // Decimal::parse-ready
};

inline std::optional<NumberToken> scan_number(std::string_view text,
                                              size_t from) {
    for (size_t i = from; i < text.size(); ++i) {
        if (!is_digit(text[i])) continue;

        size_t begin = i;
        std::string cleaned;
        // pull in an adjacent "-" / "$" prefix (either order)
        size_t p = begin;
        bool negative = false;
        while (p > from) {
            char prev = text[p - 1];
            if (prev == '$' && !negative) {
                --p;
            } else if (prev == '-' && !negative) {
                negative = true;
                --p;
            } else {
                break;
            }
        }
        // a '-' glued to a preceding word is a hyphen, not a sign
        if (negative && p > 0 && is_alnum(text[p - 1])) {
            negative = false;
            p = begin;
        }
        begin = p;
        if (negative) cleaned += '-';

        size_t j = i;
        while (j < text.size() && is_digit(text[j])) cleaned += text[j++];
        // thousands groups: ",ddd" not followed by another digit
        while (j + 3 < text.size() && text[j] == ',' &&
               is_digit(text[j + 1]) && is_digit(text[j + 2]) &&
               is_digit(text[j + 3]) &&
               (j + 4 >= text.size() || !is_digit(text[j + 4]))) {
            cleaned += text.substr(j + 1, 3);
            j += 4;
        }
        if (j < text.size() && text[j] == '.' && j + 1 < text.size() &&
            is_digit(text[j + 1])) {
            cleaned += '.';
            ++j;
            while (j < text.size() && is_digit(text[j])) cleaned += text[j++];
        }
        NumberToken tok;
        tok.begin = begin;
        tok.end = j;
        tok.cleaned = std::move(cleaned);
        return tok;
    }
    return std::nullopt;
}

inline std::optional<NumberToken> last_number(std::string_view text) {
    std::optional<NumberToken> last;
    size_t pos = 0;
    while (auto tok = scan_number(text, pos)) {
        pos = tok->end;
        last = std::move(tok);
    }
    return last;
}

inline bool is_label_char(char c) {
    char l = to_lower_ascii(c);
    return l >= 'a' && l <= 'e';
}

struct LabelToken {
    size_t begin = 0;
    size_t end = 0;
    char label = 0;  // uppercase
};

// "(a)".."(e)" at position i, or a bare label letter bounded by
// non-alphanumerics on both sides.
inline std::optional<LabelToken> label_at(std::string_view text, size_t i) {
    if (text[i] == '(' && i + 2 < text.size() && is_label_char(text[i + 1]) &&
        text[i + 2] == ')') {
        return LabelToken{i, i + 3,
                          static_cast<char>(to_lower_ascii(text[i + 1]) - 'a' +
                                            'A')};
    }
    if (is_label_char(text[i]) && (i == 0 || !is_alnum(text[i - 1])) &&
        (i + 1 >= text.size() || !is_alnum(text[i + 1]))) {
        return LabelToken{i, i + 1,
                          static_cast<char>(to_lower_ascii(text[i]) - 'a' +
                                            'A')};
    }
    return std::nullopt;
}

// The word starting at the first letter at or after `from`.
inline std::optional<std::pair<size_t, size_t>> next_word(
    std::string_view text, size_t from) {
    size_t i = from;
    while (i < text.size() && !is_alnum(text[i])) ++i;
    if (i >= text.size()) return std::nullopt;
    size_t j = i;
    while (j < text.size() && (is_alnum(text[j]) || text[j] == '\'')) ++j;
    return std::make_pair(i, j);
}

inline std::optional<bool> word_as_bool(std::string_view word) {
    std::string w = lower_ascii(word);
    if (w == "yes") return true;
    if (w == "no") return false;
    return std::nullopt;
}

// All byte offsets of the anchor, in order.
inline std::vector<size_t> anchor_positions(std::string_view text) {
    std::vector<size_t> out;
    size_t pos = 0;
    while (pos + kAnchor.size() <= text.size()) {
        bool hit = true;
        for (size_t j = 0; j < kAnchor.size(); ++j) {
            if (to_lower_ascii(text[pos + j]) != kAnchor[j]) {
                hit = false;
                break;
            }
        }
        if (hit) {
            out.push_back(pos);
            pos += kAnchor.size();
        } else {
            ++pos;
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Extractors. All four are pure scanners: any byte sequence in, a value or
// a miss out, never an exception.

inline ExtractResult extract_numeric(std::string_view transcript) {
    using namespace detail;
    if (auto at = rfind_ci(transcript, kAnchor)) {
        if (auto tok = scan_number(transcript, *at + kAnchor.size())) {
            if (auto d = Decimal::parse(tok->cleaned)) {
                return ExtractResult::hit(GoldAnswer::of_numeric(*d),
                                          tok->begin, tok->end,
                                          "numeric.anchor");
            }
        }
    }
    if (auto tok = last_number(transcript)) {
        if (auto d = Decimal::parse(tok->cleaned)) {
            return ExtractResult::hit(GoldAnswer::of_numeric(*d), tok->begin,
                                      tok->end, "numeric.last_number");
        }
    }
    return ExtractResult::miss();
}

inline ExtractResult extract_choice(std::string_view transcript,
                                    std::string_view allowed) {
    using namespace detail;
    require(!allowed.empty(), Errc::invalid_argument, "allowed labels empty");
    for (char c : allowed) {
        require(c >= 'A' && c <= 'E', Errc::invalid_argument,
                "allowed labels must be uppercase A-E");
    }
    auto finish = [&](const LabelToken& tok,
                      const char* rule) -> ExtractResult {
        if (allowed.find(tok.label) == std::string_view::npos) {
            return ExtractResult::miss(ExtractStatus::label_out_of_range);
        }
        return ExtractResult::hit(GoldAnswer::of_choice(tok.label), tok.begin,
                                  tok.end, rule);
    };

    if (auto at = rfind_ci(transcript, kAnchor)) {
        for (size_t i = *at + kAnchor.size(); i < transcript.size(); ++i) {
            if (auto tok = label_at(transcript, i)) {
                return finish(*tok, "choice.anchor");
            }
        }
    }
    // fallback: parenthesized labels anywhere beat bare capitals, which
    // keeps the article "a" from reading as a label
    std::optional<LabelToken> last_paren, last_bare;
    for (size_t i = 0; i < transcript.size(); ++i) {
        if (auto tok = label_at(transcript, i)) {
            if (tok->end - tok->begin == 3) {
                last_paren = *tok;
            } else if (transcript[i] >= 'A' && transcript[i] <= 'E') {
                last_bare = *tok;
            }
            i = tok->end - 1;
        }
    }
    if (last_paren) return finish(*last_paren, "choice.last_label");
    if (last_bare) return finish(*last_bare, "choice.last_label");
    return ExtractResult::miss();
}

inline ExtractResult extract_boolean(std::string_view transcript) {
    using namespace detail;
    auto anchors = anchor_positions(transcript);
    for (size_t k = anchors.size(); k-- > 0;) {
        auto word = next_word(transcript, anchors[k] + kAnchor.size());
        if (!word) continue;
        auto value = word_as_bool(
            transcript.substr(word->first, word->second - word->first));
        if (value) {
            return ExtractResult::hit(GoldAnswer::of_boolean(*value),
                                      word->first, word->second,
                                      "boolean.anchor");
        }
    }
    // fallback: last standalone yes/no token
    std::optional<ExtractedAnswer> last;
    size_t pos = 0;
    while (auto word = next_word(transcript, pos)) {
        pos = word->second;
        auto value = word_as_bool(
            transcript.substr(word->first, word->second - word->first));
        if (value) {
            last = {GoldAnswer::of_boolean(*value), word->first, word->second,
                    "boolean.trailing_token"};
        }
    }
    if (last) {
        ExtractResult r;
        r.status = ExtractStatus::ok;
        r.answer = std::move(last);
        return r;
    }
    return ExtractResult::miss();
}

inline ExtractResult extract_expression(std::string_view transcript) {
    using namespace detail;
    auto scan = scan_boxed_groups(transcript);
    if (scan.saw_unbalanced) {
        return ExtractResult::miss(ExtractStatus::unbalanced_braces);
    }
    if (!scan.groups.empty()) {
        const auto& g = scan.groups.back();
        return ExtractResult::hit(
            GoldAnswer::of_expression(collapse_ws(g.content)), g.start, g.end,
            "expression.boxed");
    }
    if (auto at = rfind_ci(transcript, kAnchor)) {
        std::string tail =
            collapse_ws(transcript.substr(*at + kAnchor.size()));
        while (!tail.empty() &&
               (tail.back() == '.' || tail.back() == '!' ||
                tail.back() == ':')) {
            tail.pop_back();
        }
        if (!tail.empty() && tail.front() == ':') tail.erase(0, 1);
        std::string value = trim(tail);
        if (!value.empty()) {
            size_t begin = *at + kAnchor.size();
            while (begin < transcript.size() &&
                   is_ascii_space(transcript[begin])) {
                ++begin;
            }
            return ExtractResult::hit(GoldAnswer::of_expression(value), begin,
                                      transcript.size(), "expression.anchor");
        }
    }
    return ExtractResult::miss();
}

// Dispatch on the task kind of the gold answer.
inline ExtractResult extract_for_kind(TaskKind kind,
                                      std::string_view transcript,
                                      std::string_view allowed = "ABCDE") {
    switch (kind) {
        case TaskKind::numeric: return extract_numeric(transcript);
        case TaskKind::choice: return extract_choice(transcript, allowed);
        case TaskKind::boolean_answer: return extract_boolean(transcript);
        case TaskKind::expression: return extract_expression(transcript);
    }
    return ExtractResult::miss();
}

// ---------------------------------------------------------------------------
// Comparison

// Integers compare exactly after normalization; once either side carries a
// fractional part, |a - b| <= 1e-6 * max(1, |b|) with b the gold value.
inline bool numeric_match(const Decimal& extracted, const Decimal& gold) {
    if (extracted.is_integer() && gold.is_integer()) {
        return extracted == gold;
    }
    long double a = extracted.value();
    long double b = gold.value();
    long double scale = std::max<long double>(1.0L, std::fabs(b));
    return std::fabs(a - b) <= 1e-6L * scale;
}

inline bool answers_match(const GoldAnswer& extracted,
                          const GoldAnswer& gold) {
    if (extracted.kind != gold.kind) return false;
    switch (gold.kind) {
        case TaskKind::numeric:
            return numeric_match(extracted.numeric, gold.numeric);
        case TaskKind::choice:
            return extracted.choice == gold.choice;
        case TaskKind::boolean_answer:
            return extracted.boolean == gold.boolean;
        case TaskKind::expression:
            return extracted.expression_norm == gold.expression_norm;
    }
    return false;
}

}  // namespace erp
