#pragma once

#include <stdexcept>
#include <string>

namespace erp {

// Failure codes surfaced across the library. Extraction outcomes
// (NO_ANSWER etc.) are not here; they are ordinary return values.
enum class Errc {
    invalid_argument,
    malformed_record,
    gold_missing,
    mixed_styles,
    empty_exemplars,
    empty_question,
    empty_selection,
    parse_shortfall,
    empty_generation,
    auth_failed,
    rate_limited_exhausted,
    transport,
    malformed_response,
    replay_unmatched,
    cancelled,
    fixture_missing,
    fixture_drift,
    mismatched_runs,
    judge_unparseable,
    length_mismatch,
    mixed_runs,
    unknown_category,
    io_error,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::invalid_argument: return "INVALID_ARGUMENT";
        case Errc::malformed_record: return "MALFORMED_RECORD";
        case Errc::gold_missing: return "GOLD_MISSING";
        case Errc::mixed_styles: return "MIXED_STYLES";
        case Errc::empty_exemplars: return "EMPTY_EXEMPLARS";
        case Errc::empty_question: return "EMPTY_QUESTION";
        case Errc::empty_selection: return "EMPTY_SELECTION";
        case Errc::parse_shortfall: return "PARSE_SHORTFALL";
        case Errc::empty_generation: return "EMPTY_GENERATION";
        case Errc::auth_failed: return "AUTH_FAILED";
        case Errc::rate_limited_exhausted: return "RATE_LIMITED_EXHAUSTED";
        case Errc::transport: return "TRANSPORT";
        case Errc::malformed_response: return "MALFORMED_RESPONSE";
        case Errc::replay_unmatched: return "REPLAY_UNMATCHED";
        case Errc::cancelled: return "CANCELLED";
        case Errc::fixture_missing: return "FIXTURE_MISSING";
        case Errc::fixture_drift: return "FIXTURE_DRIFT";
        case Errc::mismatched_runs: return "MISMATCHED_RUNS";
        case Errc::judge_unparseable: return "JUDGE_UNPARSEABLE";
        case Errc::length_mismatch: return "LENGTH_MISMATCH";
        case Errc::mixed_runs: return "MIXED_RUNS";
        case Errc::unknown_category: return "UNKNOWN_CATEGORY";
        case Errc::io_error: return "IO_ERROR";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message),
          code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool cond, Errc code, const std::string& message) {
    if (!cond) fail(code, message);
}

}  // namespace erp
