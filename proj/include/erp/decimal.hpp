#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace erp {

// Exact decimal number stored as sign + digit strings. Gold answers are
// exact, so they never pass through binary floating point; doubles are
// only produced on demand for tolerance comparisons.
class Decimal {
public:
    Decimal() : negative_(false), int_part_("0") {}

    // Accepts [+-]? digits [. digits]? with at least one digit overall;
    // "5." and ".5" are both valid. No exponents, no separators.
    static std::optional<Decimal> parse(std::string_view text) {
        Decimal d;
        size_t i = 0;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            d.negative_ = text[i] == '-';
            ++i;
        }
        std::string int_part, frac_part;
        while (i < text.size() && is_digit(text[i])) int_part += text[i++];
        if (i < text.size() && text[i] == '.') {
            ++i;
            while (i < text.size() && is_digit(text[i])) frac_part += text[i++];
        }
        if (i != text.size() || (int_part.empty() && frac_part.empty())) {
            return std::nullopt;
        }
        d.int_part_ = std::move(int_part);
        d.frac_part_ = std::move(frac_part);
        d.normalize();
        return d;
    }

    bool is_integer() const { return frac_part_.empty(); }
    bool is_negative() const { return negative_; }

    // Canonical form: no leading zeros, no trailing fraction zeros, no
    // "-0". parse(canonical()) round-trips to an equal value.
    std::string canonical() const {
        std::string s;
        if (negative_) s += '-';
        s += int_part_;
        if (!frac_part_.empty()) {
            s += '.';
            s += frac_part_;
        }
        return s;
    }

    long double value() const {
        return std::strtold(canonical().c_str(), nullptr);
    }

    friend bool operator==(const Decimal& a, const Decimal& b) {
        return a.negative_ == b.negative_ && a.int_part_ == b.int_part_ &&
               a.frac_part_ == b.frac_part_;
    }
    friend bool operator!=(const Decimal& a, const Decimal& b) {
        return !(a == b);
    }

private:
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }

    void normalize() {
        size_t first = int_part_.find_first_not_of('0');
        int_part_ = first == std::string::npos ? "0" : int_part_.substr(first);
        size_t last = frac_part_.find_last_not_of('0');
        frac_part_ =
            last == std::string::npos ? "" : frac_part_.substr(0, last + 1);
        if (int_part_ == "0" && frac_part_.empty()) negative_ = false;
    }

    bool negative_;
    std::string int_part_;
    std::string frac_part_;
};

}  // namespace erp
